#include "usrd/irs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "usrd/errors.hpp"
#include "usrd/lp.hpp"
#include "usrd/parallel.hpp"

namespace usrd {

namespace {

void check_sampling_distribution(const SamplingDistribution& p_s, std::size_t expected) {
  if (p_s.size() != expected)
    fail(Errc::DimensionMismatch, "P_S must have one entry per k-subset");
  double s = 0.0;
  for (double v : p_s) {
    if (v < -1e-12) fail(Errc::PmfNotNormalized, "P_S has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) fail(Errc::PmfNotNormalized, "P_S does not sum to 1");
}

std::vector<RdBranch> irs_branches(const SourceModel& model,
                                   const std::vector<std::vector<int>>& subsets,
                                   const SamplingDistribution& p_s, const std::vector<int>& cell) {
  auto weights = model.cell_weights(cell);
  std::vector<RdBranch> branches;
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    if (p_s[a] <= 0.0) continue;
    RdBranch b;
    b.weight = p_s[a];
    b.px = model.marginal(weights, subsets[a]);
    b.cost = modified_distortion(model, cell, subsets[a]).rows;
    branches.push_back(std::move(b));
  }
  return branches;
}

}  // namespace

std::shared_ptr<RdCurveSolver> irs_cell_curve(const SourceModel& model, int k,
                                              const SamplingDistribution& p_s,
                                              const std::vector<int>& cell,
                                              const Tolerances& tol) {
  auto subsets = k_subsets(model.m, k);
  check_sampling_distribution(p_s, subsets.size());
  return std::make_shared<RdCurveSolver>(irs_branches(model, subsets, p_s, cell), tol);
}

RDPoint rho_irs(const SourceModel& model, int k, const SamplingDistribution& p_s,
                const std::vector<int>& cell, double delta, Setting setting,
                const Tolerances& tol) {
  auto subsets = k_subsets(model.m, k);
  check_sampling_distribution(p_s, subsets.size());
  if (setting == Setting::Bayes)
    return RdCurveSolver(irs_branches(model, subsets, p_s, cell), tol).at_delta(delta);

  std::vector<SourceBranch> branches;
  std::vector<std::size_t> live;
  auto weights = model.cell_weights(cell);
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    if (p_s[a] <= 0.0) continue;
    branches.push_back({p_s[a], model.marginal(weights, subsets[a])});
    live.push_back(a);
  }
  std::vector<MultiConstraint> cons;
  for (int tau : cell) {
    MultiConstraint con;
    con.level = delta;
    for (std::size_t a : live) con.cost.push_back(modified_distortion(model, {tau}, subsets[a]).rows);
    cons.push_back(std::move(con));
  }
  return rd_multi(branches, cons, tol);
}

namespace {

// Inner value of the k-IRS outer problem at a fixed P_S.
double irs_inner_value(const SourceModel& model, int k, const SamplingDistribution& p_s,
                       const AmbiguityPartition& part, double Delta, Setting setting,
                       const Tolerances& tol) {
  try {
    if (setting == Setting::Bayes) {
      std::vector<WeightedCurve> cells;
      for (int c = 0; c < part.num_cells(); ++c)
        cells.push_back({part.induced_prior[c], irs_cell_curve(model, k, p_s, part.cells[c], tol)});
      return minmax_allocation(cells, Delta, tol).first;
    }
    double rate = 0.0;
    for (const auto& cell : part.cells)
      rate = std::max(rate, rho_irs(model, k, p_s, cell, Delta, Setting::NonBayes, tol).rate);
    return rate;
  } catch (const Error& e) {
    if (e.code() == Errc::DeltaOutOfRange || e.code() == Errc::Infeasible ||
        e.code() == Errc::InfeasibleDelta)
      return std::numeric_limits<double>::infinity();
    throw;
  }
}

std::vector<SamplingDistribution> simplex_grid(int dims, int steps) {
  std::vector<SamplingDistribution> out;
  SamplingDistribution cur(dims, 0.0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == dims - 1) {
      cur[pos] = static_cast<double>(left) / steps;
      out.push_back(cur);
      return;
    }
    for (int take = 0; take <= left; ++take) {
      cur[pos] = static_cast<double>(take) / steps;
      self(self, pos + 1, left - take);
    }
  };
  rec(rec, 0, steps);
  return out;
}

SamplingDistribution project_to_simplex(SamplingDistribution v) {
  for (double& x : v) x = std::max(0.0, x);
  double s = 0.0;
  for (double x : v) s += x;
  if (s <= 0.0) return SamplingDistribution(v.size(), 1.0 / v.size());
  for (double& x : v) x /= s;
  return v;
}

// Golden-section polish for the two-subset case (one effective coordinate).
SamplingDistribution golden_polish(const std::function<double(const SamplingDistribution&)>& f,
                                   double lo, double hi, int iters) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f({x1, 1.0 - x1}), f2 = f({x2, 1.0 - x2});
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f({x1, 1.0 - x1});
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f({x2, 1.0 - x2});
    }
  }
  double x = f1 <= f2 ? x1 : x2;
  return {x, 1.0 - x};
}

// Nelder-Mead over the probability simplex (reflect/contract/shrink, iterates
// projected back onto the simplex).
SamplingDistribution nelder_mead_simplex(const std::function<double(const SamplingDistribution&)>& f,
                                         SamplingDistribution start, int budget) {
  const int n = static_cast<int>(start.size());
  std::vector<SamplingDistribution> pts;
  std::vector<double> vals;
  pts.push_back(start);
  vals.push_back(f(start));
  for (int i = 0; i < n; ++i) {
    SamplingDistribution p = start;
    p[i] += 0.1;
    p = project_to_simplex(p);
    pts.push_back(p);
    vals.push_back(f(p));
  }
  int evals = n + 1;
  while (evals < budget) {
    std::vector<int> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    if (vals[order.back()] - vals[order.front()] < 1e-10) break;
    int worst = order.back();
    SamplingDistribution centroid(n, 0.0);
    for (int id : order)
      if (id != worst)
        for (int i = 0; i < n; ++i) centroid[i] += pts[id][i] / (pts.size() - 1);
    auto blend = [&](double t) {
      SamplingDistribution p(n);
      for (int i = 0; i < n; ++i) p[i] = centroid[i] + t * (centroid[i] - pts[worst][i]);
      return project_to_simplex(p);
    };
    SamplingDistribution refl = blend(1.0);
    double f_refl = f(refl);
    ++evals;
    if (f_refl < vals[order.front()]) {
      SamplingDistribution expd = blend(2.0);
      double f_expd = f(expd);
      ++evals;
      if (f_expd < f_refl) {
        pts[worst] = expd;
        vals[worst] = f_expd;
      } else {
        pts[worst] = refl;
        vals[worst] = f_refl;
      }
    } else if (f_refl < vals[worst]) {
      pts[worst] = refl;
      vals[worst] = f_refl;
    } else {
      SamplingDistribution contr = blend(-0.5);
      double f_contr = f(contr);
      ++evals;
      if (f_contr < vals[worst]) {
        pts[worst] = contr;
        vals[worst] = f_contr;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (static_cast<int>(i) == order.front()) continue;
          for (int j = 0; j < n; ++j)
            pts[i][j] = 0.5 * (pts[i][j] + pts[order.front()][j]);
          pts[i] = project_to_simplex(pts[i]);
          vals[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  int best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (vals[i] < vals[best]) best = static_cast<int>(i);
  return pts[best];
}

}  // namespace

UsrdfIrsResult usrdf_irs(const SourceModel& model, int k, double Delta, Setting setting,
                         const Tolerances& tol, const IrsOptions& opts) {
  auto [dmin, dmax] = delta_bounds_irs(model, k, setting);
  if (Delta < dmin - tol.feas)
    fail(Errc::DeltaOutOfRange,
         "Delta " + std::to_string(Delta) + " below Delta_min " + std::to_string(dmin));
  auto subsets = k_subsets(model.m, k);
  AmbiguityPartition part = theta2_partition(model, k);

  auto value = [&](const SamplingDistribution& p_s) {
    return irs_inner_value(model, k, p_s, part, Delta, setting, tol);
  };

  SamplingDistribution best_p;
  double best_v = std::numeric_limits<double>::infinity();
  if (subsets.size() == 1) {
    best_p = {1.0};
    best_v = value(best_p);
  } else {
    auto grid = simplex_grid(static_cast<int>(subsets.size()), opts.grid_steps);
    std::vector<double> grid_vals(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { grid_vals[i] = value(grid[i]); });
    std::size_t seed = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (grid_vals[i] < grid_vals[seed]) seed = i;
    best_p = grid[seed];
    best_v = grid_vals[seed];

    if (std::isfinite(best_v)) {
      SamplingDistribution polished =
          subsets.size() == 2
              ? golden_polish(value, std::max(0.0, best_p[0] - 0.25),
                              std::min(1.0, best_p[0] + 0.25), 60)
              : nelder_mead_simplex(value, best_p, opts.descent_iters);
      double pol_v = value(polished);
      if (pol_v < best_v) {
        best_p = polished;
        best_v = pol_v;
      }
    }
  }
  if (!std::isfinite(best_v))
    fail(Errc::DeltaOutOfRange, "Delta infeasible for every sampling distribution on the grid");

  UsrdfIrsResult res;
  res.rate = best_v;
  res.sampling = best_p;
  if (setting == Setting::Bayes) {
    std::vector<WeightedCurve> cells;
    for (int c = 0; c < part.num_cells(); ++c)
      cells.push_back({part.induced_prior[c], irs_cell_curve(model, k, best_p, part.cells[c], tol)});
    auto [rate, alloc] = minmax_allocation(cells, Delta, tol);
    res.rate = rate;
    res.allocation = ThresholdAllocation{alloc, rate};
  }
  return res;
}

std::pair<double, double> delta_bounds_irs(const SourceModel& model, int k, Setting setting) {
  auto subsets = k_subsets(model.m, k);
  AmbiguityPartition part = theta2_partition(model, k);
  Tolerances tol;

  if (setting == Setting::Bayes) {
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = std::numeric_limits<double>::infinity();
    for (const auto& A : subsets) {
      double a_min = 0.0, a_max = 0.0;
      for (int c = 0; c < part.num_cells(); ++c) {
        auto curve = fs_cell_curve(model, A, part.cells[c], tol);
        a_min += part.induced_prior[c] * curve->delta_min();
        a_max += part.induced_prior[c] * curve->delta_max();
      }
      dmin = std::min(dmin, a_min);
      dmax = std::min(dmax, a_max);
    }
    return {dmin, dmax};
  }

  // Tabulated per-(A, cell) point-mass minmax values, then an LP over P_S.
  const int na = static_cast<int>(subsets.size());
  const int nc = part.num_cells();
  std::vector<std::vector<double>> v(na, std::vector<double>(nc));
  for (int a = 0; a < na; ++a)
    for (int c = 0; c < nc; ++c) v[a][c] = pointmass_minmax(model, subsets[a], part.cells[c]);

  lp::Problem prob;
  prob.num_vars = na + 1;  // P_S entries plus the epigraph variable t
  prob.objective.assign(prob.num_vars, 0.0);
  prob.objective[na] = 1.0;
  for (int c = 0; c < nc; ++c) {
    std::vector<double> row(prob.num_vars, 0.0);
    for (int a = 0; a < na; ++a) row[a] = v[a][c];
    row[na] = -1.0;
    prob.a_ub.push_back(std::move(row));
    prob.b_ub.push_back(0.0);
  }
  std::vector<double> norm(prob.num_vars, 0.0);
  for (int a = 0; a < na; ++a) norm[a] = 1.0;
  prob.a_eq.push_back(std::move(norm));
  prob.b_eq.push_back(1.0);
  lp::Solution sol = lp::solve(prob);
  double dmin = sol.status == lp::Status::Optimal ? sol.value : 0.0;

  double dmax = 0.0;
  for (const auto& cell : part.cells) dmax = std::max(dmax, constant_minmax(model, cell));
  return {dmin, dmax};
}

}  // namespace usrd
