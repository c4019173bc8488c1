#include "usrd/mrs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "usrd/errors.hpp"
#include "usrd/lp.hpp"
#include "usrd/parallel.hpp"

namespace usrd {

namespace {

// Canonical key of the (S, X_S)-partition a map induces: per joint symbol,
// the sampling-cell id (relabeled by first occurrence) and the atom id within
// that cell (ditto). Maps with equal keys give identical sampler-output
// structure for every tau.
std::vector<std::pair<int, int>> partition_key(const SourceModel& model,
                                               const std::vector<std::vector<int>>& subsets,
                                               const std::vector<int>& map) {
  const int nx = model.joint_size();
  std::vector<int> cell_relabel(subsets.size(), -1);
  int next_cell = 0;
  std::map<std::pair<int, int>, int> atom_relabel;  // (cell, x_A value) -> atom id
  std::vector<int> atoms_in_cell(subsets.size(), 0);
  std::vector<std::pair<int, int>> key(nx);
  for (int x = 0; x < nx; ++x) {
    int a = map[x];
    if (cell_relabel[a] < 0) cell_relabel[a] = next_cell++;
    int xa = model.project_joint(x, subsets[a]);
    auto [it, inserted] = atom_relabel.try_emplace({a, xa}, atoms_in_cell[a]);
    if (inserted) ++atoms_in_cell[a];
    key[x] = {cell_relabel[a], it->second};
  }
  return key;
}

}  // namespace

SamplerEnumeration enumerate_pure_samplers(const SourceModel& model, int k, long long enum_cap) {
  auto subsets = k_subsets(model.m, k);
  const int na = static_cast<int>(subsets.size());
  const int nx = model.joint_size();
  double total = std::pow(static_cast<double>(na), nx);
  if (total > static_cast<double>(enum_cap))
    fail(Errc::TooManySamplers, "|A_k|^|X_M| = " + std::to_string(total) +
                                    " exceeds the enumeration cap; reduce the alphabet or raise the cap");

  SamplerEnumeration out;
  out.total_maps = static_cast<long long>(total);
  std::map<std::vector<std::pair<int, int>>, int> seen;
  std::vector<int> map(nx, 0);
  while (true) {
    auto key = partition_key(model, subsets, map);
    if (seen.emplace(std::move(key), 1).second) out.samplers.push_back({map});
    int pos = nx - 1;
    while (pos >= 0 && ++map[pos] == na) map[pos--] = 0;
    if (pos < 0) break;
  }
  return out;
}

std::shared_ptr<RdCurveSolver> mrs_pure_curve(const SourceModel& model, int k,
                                              const DeterministicSampler& w, int tau,
                                              const Tolerances& tol) {
  auto subsets = k_subsets(model.m, k);
  if (static_cast<int>(w.map.size()) != model.joint_size())
    fail(Errc::DimensionMismatch, "sampler map must cover every joint symbol");
  if (tau < 0 || tau >= model.num_theta()) fail(Errc::UnknownTau, "tau index out of range");
  const Pmf& joint = model.family[tau];
  const int ny = model.yb_size();

  std::vector<RdBranch> branches;
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    JointIndexer sub = model.sub_indexer(subsets[a]);
    Pmf mass(sub.total(), 0.0);
    Matrix cost(sub.total(), std::vector<double>(ny, 0.0));
    double branch_mass = 0.0;
    for (int x = 0; x < model.joint_size(); ++x) {
      if (w.map[x] != static_cast<int>(a)) continue;
      int xa = model.project_joint(x, subsets[a]);
      int xb = model.xb_of_joint(x);
      mass[xa] += joint[x];
      branch_mass += joint[x];
      for (int y = 0; y < ny; ++y) cost[xa][y] += joint[x] * model.d(xb, y);
    }
    if (branch_mass <= 0.0) continue;
    for (int xa = 0; xa < sub.total(); ++xa) {
      if (mass[xa] > 0.0)
        for (double& v : cost[xa]) v /= mass[xa];
    }
    Pmf px(sub.total());
    for (int xa = 0; xa < sub.total(); ++xa) px[xa] = mass[xa] / branch_mass;
    branches.push_back({branch_mass, std::move(px), std::move(cost)});
  }
  return std::make_shared<RdCurveSolver>(std::move(branches), tol);
}

RDPoint rho_mrs_pure(const SourceModel& model, int k, const DeterministicSampler& w, int tau,
                     double delta, const Tolerances& tol) {
  return mrs_pure_curve(model, k, w, tau, tol)->at_delta(delta);
}

namespace {

struct CurveTab {
  std::vector<double> deltas;
  std::vector<double> rates;
  std::shared_ptr<RdCurveSolver> curve;
};

CurveTab tabulate(const std::shared_ptr<RdCurveSolver>& curve, int grid_points,
                  double insert_delta) {
  CurveTab tab;
  tab.curve = curve;
  double lo = curve->delta_min(), hi = curve->delta_max();
  for (int g = 0; g < grid_points; ++g)
    tab.deltas.push_back(lo + (hi - lo) * g / std::max(1, grid_points - 1));
  double ins = std::clamp(insert_delta, lo, hi);
  tab.deltas.push_back(ins);
  std::sort(tab.deltas.begin(), tab.deltas.end());
  tab.deltas.erase(std::unique(tab.deltas.begin(), tab.deltas.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                   tab.deltas.end());
  tab.rates.resize(tab.deltas.size());
  for (std::size_t i = 0; i < tab.deltas.size(); ++i)
    tab.rates[i] = curve->rate_at_delta(tab.deltas[i]);
  return tab;
}

// Carath\'eodory reduction: keep at most dim+1 support points of a convex
// combination while preserving the aggregate vector.
void caratheodory_trim(std::vector<double>& weights, const std::vector<std::vector<double>>& pts,
                       std::size_t max_support) {
  auto support = [&] {
    std::vector<int> s;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] > 1e-12) s.push_back(static_cast<int>(i));
    return s;
  };
  const std::size_t dim = pts.empty() ? 0 : pts[0].size();
  for (auto sup = support(); sup.size() > max_support && sup.size() > dim + 1; sup = support()) {
    // Affine dependence: rows are [point; 1], find nontrivial null vector.
    const std::size_t n = sup.size();
    std::vector<std::vector<double>> m(dim + 1, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t r = 0; r < dim; ++r) m[r][j] = pts[sup[j]][r];
      m[dim][j] = 1.0;
    }
    // Gaussian elimination to find a null-space vector.
    std::vector<int> pivot_col(dim + 1, -1);
    std::size_t rank = 0;
    for (std::size_t col = 0; col < n && rank <= dim; ++col) {
      std::size_t piv = rank;
      for (std::size_t r = rank; r <= dim; ++r)
        if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
      if (std::abs(m[piv][col]) < 1e-12) continue;
      std::swap(m[rank], m[piv]);
      for (std::size_t r = 0; r <= dim; ++r) {
        if (r == rank) continue;
        double f = m[r][col] / m[rank][col];
        for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[rank][c];
      }
      pivot_col[rank] = static_cast<int>(col);
      ++rank;
    }
    int free_col = -1;
    for (std::size_t c = 0; c < n; ++c) {
      bool is_pivot = false;
      for (std::size_t r = 0; r < rank; ++r)
        if (pivot_col[r] == static_cast<int>(c)) is_pivot = true;
      if (!is_pivot) {
        free_col = static_cast<int>(c);
        break;
      }
    }
    if (free_col < 0) break;  // points affinely independent; nothing to trim
    std::vector<double> nu(n, 0.0);
    nu[free_col] = 1.0;
    for (std::size_t r = 0; r < rank; ++r)
      nu[pivot_col[r]] = -m[r][free_col] / m[r][pivot_col[r]];
    // Step until one weight hits zero.
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (nu[j] > 1e-15) step = std::min(step, weights[sup[j]] / nu[j]);
    if (!std::isfinite(step)) {
      for (double& v : nu) v = -v;
      for (std::size_t j = 0; j < n; ++j)
        if (nu[j] > 1e-15) step = std::min(step, weights[sup[j]] / nu[j]);
      if (!std::isfinite(step)) break;
    }
    for (std::size_t j = 0; j < n; ++j) weights[sup[j]] -= step * nu[j];
    for (double& w : weights)
      if (w < 1e-12) w = 0.0;
  }
}

}  // namespace

UsrdfMrsResult usrdf_mrs(const SourceModel& model, int k, double Delta, Setting setting,
                         const Tolerances& tol, const MrsOptions& opts) {
  auto [dmin, dmax] = delta_bounds_mrs(model, k, setting, opts);
  if (Delta < dmin - tol.feas)
    fail(Errc::DeltaOutOfRange,
         "Delta " + std::to_string(Delta) + " below Delta_min " + std::to_string(dmin));

  SamplerEnumeration en = enumerate_pure_samplers(model, k, opts.enum_cap);
  const int nw = static_cast<int>(en.samplers.size());
  const int nt = model.num_theta();

  std::vector<std::vector<CurveTab>> tabs(nw, std::vector<CurveTab>(nt));
  parallel_for(static_cast<std::size_t>(nw) * nt, [&](std::size_t i) {
    int wi = static_cast<int>(i) / nt, t = static_cast<int>(i) % nt;
    tabs[wi][t] = tabulate(mrs_pure_curve(model, k, en.samplers[wi], t, tol), opts.grid_points,
                           Delta);
  });

  // Epigraph LP. Variables: beta_w, lambda_{w,tau,g}, t.
  std::vector<int> beta_var(nw);
  std::vector<std::vector<int>> lambda_base(nw, std::vector<int>(nt));
  int nv = 0;
  for (int wi = 0; wi < nw; ++wi) beta_var[wi] = nv++;
  for (int wi = 0; wi < nw; ++wi)
    for (int t = 0; t < nt; ++t) {
      lambda_base[wi][t] = nv;
      nv += static_cast<int>(tabs[wi][t].deltas.size());
    }
  const int t_var = nv++;

  lp::Problem prob;
  prob.num_vars = nv;
  prob.objective.assign(nv, 0.0);
  prob.objective[t_var] = 1.0;
  // sum_g lambda_{w,tau,g} = beta_w
  for (int wi = 0; wi < nw; ++wi)
    for (int t = 0; t < nt; ++t) {
      std::vector<double> row(nv, 0.0);
      for (std::size_t g = 0; g < tabs[wi][t].deltas.size(); ++g)
        row[lambda_base[wi][t] + static_cast<int>(g)] = 1.0;
      row[beta_var[wi]] = -1.0;
      prob.a_eq.push_back(std::move(row));
      prob.b_eq.push_back(0.0);
    }
  // sum_w beta_w = 1
  {
    std::vector<double> row(nv, 0.0);
    for (int wi = 0; wi < nw; ++wi) row[beta_var[wi]] = 1.0;
    prob.a_eq.push_back(std::move(row));
    prob.b_eq.push_back(1.0);
  }
  // rate epigraph per tau
  for (int t = 0; t < nt; ++t) {
    std::vector<double> row(nv, 0.0);
    for (int wi = 0; wi < nw; ++wi)
      for (std::size_t g = 0; g < tabs[wi][t].rates.size(); ++g)
        row[lambda_base[wi][t] + static_cast<int>(g)] = tabs[wi][t].rates[g];
    row[t_var] = -1.0;
    prob.a_ub.push_back(std::move(row));
    prob.b_ub.push_back(0.0);
  }
  // distortion constraints
  if (setting == Setting::Bayes) {
    std::vector<double> row(nv, 0.0);
    for (int wi = 0; wi < nw; ++wi)
      for (int t = 0; t < nt; ++t)
        for (std::size_t g = 0; g < tabs[wi][t].deltas.size(); ++g)
          row[lambda_base[wi][t] + static_cast<int>(g)] = model.prior[t] * tabs[wi][t].deltas[g];
    prob.a_ub.push_back(std::move(row));
    prob.b_ub.push_back(Delta);
  } else {
    for (int t = 0; t < nt; ++t) {
      std::vector<double> row(nv, 0.0);
      for (int wi = 0; wi < nw; ++wi)
        for (std::size_t g = 0; g < tabs[wi][t].deltas.size(); ++g)
          row[lambda_base[wi][t] + static_cast<int>(g)] = tabs[wi][t].deltas[g];
      prob.a_ub.push_back(std::move(row));
      prob.b_ub.push_back(Delta);
    }
  }

  lp::Solution sol = lp::solve(prob);
  if (sol.status != lp::Status::Optimal)
    fail(Errc::DeltaOutOfRange, "no time-shared deterministic-sampler policy meets Delta");

  UsrdfMrsResult res;
  res.rate = std::max(0.0, sol.value);

  // Policy extraction: one slot per used sampler; per-tau points averaged and
  // snapped back onto the per-(w,tau) curve (convexity only improves them).
  for (int wi = 0; wi < nw; ++wi) {
    double beta = sol.x[beta_var[wi]];
    if (beta <= 1e-7) continue;
    MrsSlot slot;
    slot.p_u = beta;
    slot.sampler = en.samplers[wi];
    slot.rate_per_tau.resize(nt);
    slot.dist_per_tau.resize(nt);
    for (int t = 0; t < nt; ++t) {
      double dbar = 0.0;
      for (std::size_t g = 0; g < tabs[wi][t].deltas.size(); ++g)
        dbar += sol.x[lambda_base[wi][t] + static_cast<int>(g)] * tabs[wi][t].deltas[g];
      dbar = std::clamp(dbar / beta, tabs[wi][t].curve->delta_min(),
                        tabs[wi][t].curve->delta_max());
      slot.dist_per_tau[t] = dbar;
      slot.rate_per_tau[t] = tabs[wi][t].curve->rate_at_delta(dbar);
    }
    res.policy.slots.push_back(std::move(slot));
  }
  // Residual mass from dropped epsilon slots goes to the heaviest slot.
  if (!res.policy.slots.empty()) {
    double mass = 0.0;
    for (const auto& s : res.policy.slots) mass += s.p_u;
    auto heaviest = std::max_element(
        res.policy.slots.begin(), res.policy.slots.end(),
        [](const MrsSlot& a, const MrsSlot& b) { return a.p_u < b.p_u; });
    heaviest->p_u += 1.0 - mass;
  }

  const std::size_t max_slots = 2 * static_cast<std::size_t>(nt) + 1;
  if (res.policy.slots.size() > max_slots) {
    std::vector<double> weights;
    std::vector<std::vector<double>> pts;
    for (const auto& s : res.policy.slots) {
      weights.push_back(s.p_u);
      std::vector<double> v;
      v.insert(v.end(), s.rate_per_tau.begin(), s.rate_per_tau.end());
      v.insert(v.end(), s.dist_per_tau.begin(), s.dist_per_tau.end());
      pts.push_back(std::move(v));
    }
    caratheodory_trim(weights, pts, max_slots);
    std::vector<MrsSlot> kept;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] > 1e-12) {
        res.policy.slots[i].p_u = weights[i];
        kept.push_back(res.policy.slots[i]);
      }
    res.policy.slots = std::move(kept);
  }
  return res;
}

std::pair<double, double> delta_bounds_mrs(const SourceModel& model, int k, Setting setting,
                                           const MrsOptions& opts) {
  SamplerEnumeration en = enumerate_pure_samplers(model, k, opts.enum_cap);
  const int nw = static_cast<int>(en.samplers.size());
  const int nt = model.num_theta();
  Tolerances tol;

  std::vector<std::vector<double>> vmin(nw, std::vector<double>(nt));
  std::vector<std::vector<double>> vmax(nw, std::vector<double>(nt));
  parallel_for(static_cast<std::size_t>(nw) * nt, [&](std::size_t i) {
    int wi = static_cast<int>(i) / nt, t = static_cast<int>(i) % nt;
    auto curve = mrs_pure_curve(model, k, en.samplers[wi], t, tol);
    vmin[wi][t] = curve->delta_min();
    vmax[wi][t] = curve->delta_max();
  });

  if (setting == Setting::Bayes) {
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = std::numeric_limits<double>::infinity();
    for (int wi = 0; wi < nw; ++wi) {
      double emin = 0.0, emax = 0.0;
      for (int t = 0; t < nt; ++t) {
        emin += model.prior[t] * vmin[wi][t];
        emax += model.prior[t] * vmax[wi][t];
      }
      dmin = std::min(dmin, emin);
      dmax = std::min(dmax, emax);
    }
    return {dmin, dmax};
  }

  auto mix_lp = [&](const std::vector<std::vector<double>>& v) {
    lp::Problem prob;
    prob.num_vars = nw + 1;
    prob.objective.assign(prob.num_vars, 0.0);
    prob.objective[nw] = 1.0;
    for (int t = 0; t < nt; ++t) {
      std::vector<double> row(prob.num_vars, 0.0);
      for (int wi = 0; wi < nw; ++wi) row[wi] = v[wi][t];
      row[nw] = -1.0;
      prob.a_ub.push_back(std::move(row));
      prob.b_ub.push_back(0.0);
    }
    std::vector<double> norm(prob.num_vars, 0.0);
    for (int wi = 0; wi < nw; ++wi) norm[wi] = 1.0;
    prob.a_eq.push_back(std::move(norm));
    prob.b_eq.push_back(1.0);
    lp::Solution sol = lp::solve(prob);
    return sol.status == lp::Status::Optimal ? sol.value : 0.0;
  };
  return {mix_lp(vmin), mix_lp(vmax)};
}

}  // namespace usrd
