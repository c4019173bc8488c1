#pragma once

#include <string>
#include <vector>

#include "usrd/prob.hpp"

namespace usrd {

// Global numeric knobs. Values are in bits for rate quantities and in
// distortion units for distortion quantities.
struct Tolerances {
  double pmf = 1e-9;        // L-inf pmf equality (ambiguity partitions)
  double feas = 1e-7;       // distortion feasibility slack
  double gap = 1e-6;        // rate optimality / ordering slack
  double convex = 1e-6;     // midpoint-convexity slack
  double ba_gap = 1e-9;     // alternating-minimization double-bound gap
  int ba_max_iters = 5000;
};

// Finite-alphabet memoryless multiple source whose joint pmf is known only to
// lie in a finite family {P_{X|theta=tau}}, plus the reconstruction problem:
// recovery set B and a single-letter distortion table on X_B x Y_B.
struct SourceModel {
  int m = 0;
  std::vector<int> alphabets;         // |X_i|, length m
  std::vector<int> repro_alphabets;   // |Y_i|, length m (used for i in B)
  std::vector<int> recovery_set;      // 0-based component indices, ascending
  std::vector<std::string> theta_labels;
  Pmf prior;                          // mu_theta over theta_labels
  std::vector<Pmf> family;            // per-tau joint pmf, row-major, comp 0 most significant
  std::vector<double> distortion;     // |X_B| x |Y_B| row-major

  JointIndexer joint_index;           // over alphabets
  JointIndexer xb_index;              // over alphabets restricted to B
  JointIndexer yb_index;              // over repro_alphabets restricted to B

  int num_theta() const { return static_cast<int>(theta_labels.size()); }
  int joint_size() const { return joint_index.total(); }
  int xb_size() const { return xb_index.total(); }
  int yb_size() const { return yb_index.total(); }

  double d(int xb, int yb) const { return distortion[xb * yb_size() + yb]; }
  double d_max() const;

  // Index of x_B inside the joint symbol x.
  int xb_of_joint(int joint) const;
  // Index of x_A (A given as ascending component list) inside joint symbol x.
  int project_joint(int joint, const std::vector<int>& A) const;
  // Indexer over the sub-alphabet of an ascending component set A.
  JointIndexer sub_indexer(const std::vector<int>& A) const;

  // Marginal pmf of X_A under a mixture sum_tau w(tau) P_{X|tau}; w need not
  // be normalized (it is normalized internally).
  Pmf marginal(const std::vector<double>& theta_weights, const std::vector<int>& A) const;
  // Restricted, renormalized prior on a cell of taus.
  std::vector<double> cell_weights(const std::vector<int>& cell) const;
  int tau_index(const std::string& label) const;
};

// Partition of Theta into ambiguity atoms. Cells are canonicalized: each cell
// lists tau indices ascending, and cells are ordered by smallest member.
struct AmbiguityPartition {
  enum class Kind { Theta1, Theta2, ThetaFull };
  Kind kind = Kind::ThetaFull;
  std::vector<std::vector<int>> cells;
  Pmf induced_prior;  // prior mass per cell

  int num_cells() const { return static_cast<int>(cells.size()); }
  int cell_of(int tau) const;
  // True if every cell of *this is contained in some cell of `coarser`.
  bool refines(const AmbiguityPartition& coarser) const;
};

// Conditional expected distortion table d'(x_cond, y_B), one row per
// conditioning symbol.
struct DistortionTable {
  Matrix rows;
  std::string conditioning;  // human-readable description of the row alphabet

  int num_rows() const { return static_cast<int>(rows.size()); }
  int num_cols() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
};

SourceModel validate_model(SourceModel raw);
SourceModel load_model(const std::string& path);
std::string model_to_json(const SourceModel& model);

// Ambiguity partitions: Theta1 groups taus with identical P_{X_A|tau};
// Theta2 groups taus whose whole ordered collection of k-marginals matches.
AmbiguityPartition theta1_partition(const SourceModel& model, const std::vector<int>& A,
                                    double tol_pmf = 1e-9);
AmbiguityPartition theta2_partition(const SourceModel& model, int k, double tol_pmf = 1e-9);

// d'(x_A, y_B) = E[d(X_B, y_B) | X_A = x_A, theta in cell] with the cell
// prior restricted and renormalized.
DistortionTable modified_distortion(const SourceModel& model, const std::vector<int>& cell,
                                    const std::vector<int>& A);

// All k-subsets of {0..m-1} in lexicographic order.
std::vector<std::vector<int>> k_subsets(int m, int k);

std::string subset_name(const std::vector<int>& A);  // e.g. {0,2} -> "{1,3}" (1-based)

}  // namespace usrd
