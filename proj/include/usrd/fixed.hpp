#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "usrd/model.hpp"
#include "usrd/rd.hpp"

namespace usrd {

enum class Setting { Bayes, NonBayes };

inline const char* setting_name(Setting s) { return s == Setting::Bayes ? "bayes" : "nonbayes"; }

// Per-cell distortion budgets whose prior-average meets the global level.
struct ThresholdAllocation {
  std::vector<double> delta_per_cell;
  double max_rate = 0.0;
};

struct UsrdfResult {
  double rate = 0.0;
  std::optional<ThresholdAllocation> allocation;  // Bayes setting only
};

// Equalizing minmax over per-cell convex curves: the least rate level r such
// that the prior-weighted per-cell inverse thresholds fit under Delta. The
// returned budgets either sit at the common rate level or are clamped at the
// cell's minimum distortion.
struct WeightedCurve {
  double weight = 1.0;
  std::shared_ptr<RdCurveSolver> curve;
};
std::pair<double, std::vector<double>> minmax_allocation(const std::vector<WeightedCurve>& cells,
                                                         double Delta, const Tolerances& tol = {});

// Per-cell constrained mutual-information minimum for fixed-set sampling.
RDPoint rho_fs(const SourceModel& model, const std::vector<int>& A, const std::vector<int>& cell,
               double delta, Setting setting, const Tolerances& tol = {});

UsrdfResult usrdf_fs(const SourceModel& model, const std::vector<int>& A, double Delta,
                     Setting setting, const Tolerances& tol = {});

std::pair<double, double> delta_bounds_fs(const SourceModel& model, const std::vector<int>& A,
                                          Setting setting);

struct BestFixedSet {
  std::vector<int> set;
  double rate = 0.0;
};
BestFixedSet best_fixed_set(const SourceModel& model, int k, double Delta, Setting setting,
                            const Tolerances& tol = {});

// Shared helpers for the sampler modules.

// Curve of the Bayesian rho for one ambiguity cell under fixed-set sampling.
std::shared_ptr<RdCurveSolver> fs_cell_curve(const SourceModel& model, const std::vector<int>& A,
                                             const std::vector<int>& cell, const Tolerances& tol);

// min over deterministic maps g : X_A -> Y_B of max_{tau in cell} E[d | g, tau].
double pointmass_minmax(const SourceModel& model, const std::vector<int>& A,
                        const std::vector<int>& cell);

// E[d(X_B, y)| tau] for the best constant y, worst tau in the cell.
double constant_minmax(const SourceModel& model, const std::vector<int>& cell);

}  // namespace usrd
