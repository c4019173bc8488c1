#pragma once

#include <optional>
#include <vector>

#include "usrd/fixed.hpp"
#include "usrd/model.hpp"
#include "usrd/rd.hpp"

namespace usrd {

// Distribution over the lexicographically ordered k-subsets A_k.
using SamplingDistribution = std::vector<double>;

struct UsrdfIrsResult {
  double rate = 0.0;
  SamplingDistribution sampling;
  std::optional<ThresholdAllocation> allocation;  // per Theta2 cell, Bayes only
};

struct IrsOptions {
  int grid_steps = 8;        // coarse simplex grid resolution (step 1/grid_steps)
  int descent_iters = 200;   // local-descent evaluation budget
};

// Per-cell constrained conditional mutual-information minimum for a k-IRS:
// branches are the sampling sets in supp(P_S).
RDPoint rho_irs(const SourceModel& model, int k, const SamplingDistribution& p_s,
                const std::vector<int>& cell, double delta, Setting setting,
                const Tolerances& tol = {});

UsrdfIrsResult usrdf_irs(const SourceModel& model, int k, double Delta, Setting setting,
                         const Tolerances& tol = {}, const IrsOptions& opts = {});

std::pair<double, double> delta_bounds_irs(const SourceModel& model, int k, Setting setting);

// Curve of the Bayesian rho_irs for one Theta2 cell at a fixed P_S.
std::shared_ptr<RdCurveSolver> irs_cell_curve(const SourceModel& model, int k,
                                              const SamplingDistribution& p_s,
                                              const std::vector<int>& cell,
                                              const Tolerances& tol);

}  // namespace usrd
