#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "usrd/model.hpp"
#include "usrd/prob.hpp"

namespace usrd {

// Conditional pmf W(y|x), one row per conditioning symbol. For branched
// problems rows are laid out branch-major.
struct TestChannel {
  Matrix rows;
  bool valid(double tol = 1e-9) const;
};

struct RDPoint {
  double delta = 0.0;        // requested distortion level
  double dist = 0.0;         // distortion achieved by `channel`
  double rate = 0.0;         // bits per sample
  TestChannel channel;
  bool converged = true;
  int iterations = 0;
  std::vector<double> slope;  // Lagrange multiplier(s) at the returned solve
};

struct RDCurvePoint {
  double delta = 0.0;
  double rate = 0.0;
  std::string status;  // "ok", "below_min", "above_max"
};

struct RDCurve {
  std::string problem;
  std::vector<RDCurvePoint> points;
};

// I(X ; Y) in bits for input pmf px and channel W.
double mutual_information(const Pmf& px, const TestChannel& channel);

// One conditioning branch of an RD problem: weight P(S = A), conditional
// source pmf, and the per-branch distortion table.
struct RdBranch {
  double weight = 1.0;
  Pmf px;
  Matrix cost;  // |px| rows x |Y| cols
};

// Rate-distortion curve for a weighted family of branches:
//   R(delta) = min sum_b w_b I(p_b, W_b)  s.t.  sum_b w_b E_b[cost] <= delta,
// the conditional-mutual-information form used by every rho primitive.
// Solved by per-branch alternating minimization at a common slope, with
// bisection over the slope; solves are cached per slope.
class RdCurveSolver {
 public:
  RdCurveSolver(std::vector<RdBranch> branches, Tolerances tol = {});

  double delta_min() const { return delta_min_; }
  double delta_max() const { return delta_max_; }
  double max_rate() const;              // rate at delta_min
  RDPoint at_delta(double delta) const;
  double rate_at_delta(double delta) const { return at_delta(delta).rate; }
  // Least delta with R(delta) <= r, clamped below at delta_min.
  double delta_at_rate(double r) const;

  const std::vector<RdBranch>& branches() const { return branches_; }

 private:
  struct SlopeSolve {
    double dist = 0.0;
    double rate = 0.0;
    std::vector<Matrix> channels;
    bool converged = true;
    int iterations = 0;
  };
  const SlopeSolve& eval(double slope) const;
  RDPoint zero_rate_point() const;
  RDPoint point_from(const SlopeSolve& s, double slope, double requested) const;

  std::vector<RdBranch> branches_;
  Tolerances tol_;
  double delta_min_ = 0.0, delta_max_ = 0.0;
  double slope_max_ = 0.0;
  bool flat_ = false;
  mutable std::map<double, SlopeSolve> cache_;
};

// Classical single-source rate distortion at a target distortion.
RDPoint rd_single(const Pmf& px, const DistortionTable& d_table, double delta,
                  const Tolerances& tol = {});

// Multi-constraint form: one shared channel (per branch), several linear
// distortion constraints evaluated through per-constraint cost tables.
struct SourceBranch {
  double weight = 1.0;
  Pmf px;
};
struct MultiConstraint {
  std::vector<Matrix> cost;  // cost[branch][x][y]
  double level = 0.0;
};
RDPoint rd_multi(const std::vector<SourceBranch>& branches,
                 const std::vector<MultiConstraint>& constraints, const Tolerances& tol = {});
RDPoint rd_multi(const Pmf& px, const std::vector<std::pair<DistortionTable, double>>& constraints,
                 const Tolerances& tol = {});

// Brute-force verification oracle: exhaustive search over channels whose rows
// are quantized to multiples of 1/grid_q. Returns the least feasible mutual
// information, or nullopt when no quantized channel meets the constraints.
std::optional<double> rd_oracle(const Pmf& px, const Matrix& d, double delta, int grid_q);
std::optional<double> rd_oracle_multi(const Pmf& px,
                                      const std::vector<std::pair<Matrix, double>>& constraints,
                                      int grid_q);

// Per-iteration Lagrangian trace of the most recent traced run on this
// thread; exposed for the monotonicity property tests.
const std::vector<double>& last_lagrangian_trace();
// Runs one alternating-minimization solve with tracing enabled.
RDPoint solve_branch_traced(const Pmf& px, const Matrix& cost, double slope_bits,
                            const Tolerances& tol = {});

}  // namespace usrd
