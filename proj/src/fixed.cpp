#include "usrd/fixed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "usrd/errors.hpp"

namespace usrd {

std::pair<double, std::vector<double>> minmax_allocation(const std::vector<WeightedCurve>& cells,
                                                         double Delta, const Tolerances& tol) {
  double need_min = 0.0, need_max = 0.0;
  for (const auto& c : cells) {
    need_min += c.weight * c.curve->delta_min();
    need_max += c.weight * c.curve->delta_max();
  }
  if (Delta < need_min - tol.feas)
    fail(Errc::DeltaOutOfRange, "Delta below the Bayesian minimum " + std::to_string(need_min));
  std::vector<double> alloc(cells.size());
  if (Delta >= need_max - 1e-15) {
    for (std::size_t c = 0; c < cells.size(); ++c) alloc[c] = cells[c].curve->delta_max();
    return {0.0, alloc};
  }

  auto budget_at_rate = [&](double r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      alloc[c] = cells[c].curve->delta_at_rate(r);
      total += cells[c].weight * alloc[c];
    }
    return total;
  };

  double r_hi = 0.0;
  for (const auto& c : cells) r_hi = std::max(r_hi, c.curve->max_rate());
  double r_lo = 0.0;
  // budget decreases in r; r_hi always fits (it buys every cell's delta_min)
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (r_lo + r_hi);
    if (budget_at_rate(mid) <= Delta)
      r_hi = mid;
    else
      r_lo = mid;
  }
  budget_at_rate(r_hi);
  return {r_hi, alloc};
}

std::shared_ptr<RdCurveSolver> fs_cell_curve(const SourceModel& model, const std::vector<int>& A,
                                             const std::vector<int>& cell, const Tolerances& tol) {
  Pmf px = model.marginal(model.cell_weights(cell), A);
  DistortionTable table = modified_distortion(model, cell, A);
  return std::make_shared<RdCurveSolver>(std::vector<RdBranch>{RdBranch{1.0, px, table.rows}},
                                         tol);
}

RDPoint rho_fs(const SourceModel& model, const std::vector<int>& A, const std::vector<int>& cell,
               double delta, Setting setting, const Tolerances& tol) {
  if (setting == Setting::Bayes) return fs_cell_curve(model, A, cell, tol)->at_delta(delta);
  Pmf px = model.marginal(model.cell_weights(cell), A);
  std::vector<std::pair<DistortionTable, double>> cons;
  for (int tau : cell) cons.emplace_back(modified_distortion(model, {tau}, A), delta);
  return rd_multi(px, cons, tol);
}

double pointmass_minmax(const SourceModel& model, const std::vector<int>& A,
                        const std::vector<int>& cell) {
  Pmf px = model.marginal(model.cell_weights(cell), A);
  std::vector<Matrix> per_tau;
  for (int tau : cell) per_tau.push_back(modified_distortion(model, {tau}, A).rows);
  const int nx = static_cast<int>(px.size());
  const int ny = model.yb_size();
  double total_maps = std::pow(static_cast<double>(ny), nx);
  if (total_maps > (1 << 20)) fail(Errc::TooLarge, "pointmass_minmax: too many maps");

  // Odometer over maps g : X_A -> Y_B.
  std::vector<int> g(nx, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0.0;
    for (const auto& table : per_tau) {
      double e = 0.0;
      for (int x = 0; x < nx; ++x) e += px[x] * table[x][g[x]];
      worst = std::max(worst, e);
    }
    best = std::min(best, worst);
    int pos = nx - 1;
    while (pos >= 0 && ++g[pos] == ny) g[pos--] = 0;
    if (pos < 0) break;
  }
  return best;
}

double constant_minmax(const SourceModel& model, const std::vector<int>& cell) {
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < model.yb_size(); ++y) {
    double worst = 0.0;
    for (int tau : cell) {
      std::vector<double> w(model.num_theta(), 0.0);
      w[tau] = 1.0;
      Pmf xb = model.marginal(w, model.recovery_set);
      double e = 0.0;
      for (int xb_i = 0; xb_i < model.xb_size(); ++xb_i) e += xb[xb_i] * model.d(xb_i, y);
      worst = std::max(worst, e);
    }
    best = std::min(best, worst);
  }
  return best;
}

std::pair<double, double> delta_bounds_fs(const SourceModel& model, const std::vector<int>& A,
                                          Setting setting) {
  AmbiguityPartition part = theta1_partition(model, A);
  Tolerances tol;
  if (setting == Setting::Bayes) {
    double dmin = 0.0, dmax = 0.0;
    for (int c = 0; c < part.num_cells(); ++c) {
      auto curve = fs_cell_curve(model, A, part.cells[c], tol);
      dmin += part.induced_prior[c] * curve->delta_min();
      dmax += part.induced_prior[c] * curve->delta_max();
    }
    return {dmin, dmax};
  }
  double dmin = 0.0, dmax = 0.0;
  for (const auto& cell : part.cells) {
    dmin = std::max(dmin, pointmass_minmax(model, A, cell));
    dmax = std::max(dmax, constant_minmax(model, cell));
  }
  return {dmin, dmax};
}

UsrdfResult usrdf_fs(const SourceModel& model, const std::vector<int>& A, double Delta,
                     Setting setting, const Tolerances& tol) {
  auto [dmin, dmax] = delta_bounds_fs(model, A, setting);
  if (Delta < dmin - tol.feas)
    fail(Errc::DeltaOutOfRange,
         "Delta " + std::to_string(Delta) + " below Delta_min " + std::to_string(dmin));
  AmbiguityPartition part = theta1_partition(model, A);

  if (setting == Setting::Bayes) {
    std::vector<WeightedCurve> cells;
    for (int c = 0; c < part.num_cells(); ++c)
      cells.push_back({part.induced_prior[c], fs_cell_curve(model, A, part.cells[c], tol)});
    auto [rate, alloc] = minmax_allocation(cells, Delta, tol);
    UsrdfResult res;
    res.rate = rate;
    res.allocation = ThresholdAllocation{alloc, rate};
    return res;
  }

  double rate = 0.0;
  for (const auto& cell : part.cells) {
    if (Delta >= constant_minmax(model, cell)) continue;  // this cell is free at rate 0
    rate = std::max(rate, rho_fs(model, A, cell, Delta, Setting::NonBayes, tol).rate);
  }
  return {rate, std::nullopt};
}

BestFixedSet best_fixed_set(const SourceModel& model, int k, double Delta, Setting setting,
                            const Tolerances& tol) {
  BestFixedSet best;
  double best_rate = std::numeric_limits<double>::infinity();
  for (const auto& A : k_subsets(model.m, k)) {
    double rate;
    try {
      rate = usrdf_fs(model, A, Delta, setting, tol).rate;
    } catch (const Error& e) {
      if (e.code() == Errc::DeltaOutOfRange || e.code() == Errc::Infeasible ||
          e.code() == Errc::InfeasibleDelta)
        continue;
      throw;
    }
    if (rate < best_rate - 1e-12) {  // ties keep the lexicographically first A
      best_rate = rate;
      best.set = A;
    }
  }
  if (!std::isfinite(best_rate)) fail(Errc::NoFeasibleSet, "Delta infeasible for every A in A_k");
  best.rate = best_rate;
  return best;
}

}  // namespace usrd
