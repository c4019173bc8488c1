#include "usrd/rd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "usrd/errors.hpp"
#include "usrd/lp.hpp"

namespace usrd {

namespace {

thread_local std::vector<double> g_lagrangian_trace;

struct BranchSolve {
  Matrix channel;
  double rate = 0.0;  // bits
  double dist = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Alternating minimization of I(p, W) + slope * E[cost] for one branch.
// `slope` is in bits per distortion unit; internal math is in nats.
BranchSolve ba_branch(const Pmf& px, const Matrix& cost, double slope, const Tolerances& tol,
                      bool trace) {
  const int nx = static_cast<int>(px.size());
  const int ny = static_cast<int>(cost.empty() ? 0 : cost[0].size());
  const double sigma = slope * kLn2;

  // Row-shifted exponents keep exp() in range for large slopes.
  Matrix expo(nx, std::vector<double>(ny));
  for (int x = 0; x < nx; ++x) {
    double row_min = *std::min_element(cost[x].begin(), cost[x].end());
    for (int y = 0; y < ny; ++y) expo[x][y] = std::exp(-sigma * (cost[x][y] - row_min));
  }

  Pmf q(ny, 1.0 / ny);  // all reproduction letters stay in support
  Matrix W(nx, std::vector<double>(ny, 0.0));
  Pmf g(ny, 0.0);
  BranchSolve out;
  double prev_lagrangian = std::numeric_limits<double>::infinity();

  int iter = 0;
  for (; iter < tol.ba_max_iters; ++iter) {
    std::fill(g.begin(), g.end(), 0.0);
    double lagrangian = 0.0;  // shifted by the row minima; constant offset only
    for (int x = 0; x < nx; ++x) {
      double z = 0.0;
      for (int y = 0; y < ny; ++y) z += q[y] * expo[x][y];
      lagrangian -= px[x] * std::log(z);
      double inv_z = px[x] / z;
      for (int y = 0; y < ny; ++y) g[y] += inv_z * expo[x][y];
    }
    if (trace) g_lagrangian_trace.push_back(lagrangian);
    assert(lagrangian <= prev_lagrangian + 1e-10);
    prev_lagrangian = lagrangian;

    double gmax = 0.0;
    for (int y = 0; y < ny; ++y) gmax = std::max(gmax, g[y]);
    for (int y = 0; y < ny; ++y) q[y] *= g[y];
    // q stays normalized: sum_y q g = 1 analytically; renormalize for drift
    double qs = sum(q);
    for (double& v : q) v /= qs;
    if (std::log(std::max(gmax, 1.0)) <= tol.ba_gap * kLn2) {
      out.converged = true;
      ++iter;
      break;
    }
  }
  out.iterations = iter;

  Pmf qw(ny, 0.0);
  for (int x = 0; x < nx; ++x) {
    double z = 0.0;
    for (int y = 0; y < ny; ++y) z += q[y] * expo[x][y];
    for (int y = 0; y < ny; ++y) {
      W[x][y] = q[y] * expo[x][y] / z;
      qw[y] += px[x] * W[x][y];
    }
  }
  double rate_nats = 0.0, dist = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      if (W[x][y] > 0.0 && qw[y] > 0.0) rate_nats += px[x] * W[x][y] * std::log(W[x][y] / qw[y]);
      dist += px[x] * W[x][y] * cost[x][y];
    }
  out.channel = std::move(W);
  out.rate = std::max(0.0, rate_nats / kLn2);
  out.dist = dist;
  return out;
}

double smallest_positive_cost_gap(const std::vector<RdBranch>& branches) {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& b : branches)
    for (const auto& row : b.cost) {
      double row_min = *std::min_element(row.begin(), row.end());
      for (double v : row) {
        double e = v - row_min;
        if (e > 1e-13) gap = std::min(gap, e);
      }
    }
  return gap;
}

}  // namespace

const std::vector<double>& last_lagrangian_trace() { return g_lagrangian_trace; }

RDPoint solve_branch_traced(const Pmf& px, const Matrix& cost, double slope_bits,
                            const Tolerances& tol) {
  g_lagrangian_trace.clear();
  BranchSolve bs = ba_branch(px, cost, slope_bits, tol, true);
  RDPoint pt;
  pt.dist = bs.dist;
  pt.rate = bs.rate;
  pt.converged = bs.converged;
  pt.iterations = bs.iterations;
  pt.slope = {slope_bits};
  pt.channel.rows = bs.channel;
  return pt;
}

bool TestChannel::valid(double tol) const {
  for (const auto& row : rows) {
    double s = 0.0;
    for (double v : row) {
      if (v < -tol) return false;
      s += v;
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

double mutual_information(const Pmf& px, const TestChannel& channel) {
  if (px.size() != channel.rows.size())
    fail(Errc::DimensionMismatch, "mutual_information: |px| != channel rows");
  const int ny = channel.rows.empty() ? 0 : static_cast<int>(channel.rows[0].size());
  for (const auto& row : channel.rows)
    if (static_cast<int>(row.size()) != ny)
      fail(Errc::DimensionMismatch, "mutual_information: ragged channel");
  Pmf qy(ny, 0.0);
  for (std::size_t x = 0; x < px.size(); ++x)
    for (int y = 0; y < ny; ++y) qy[y] += px[x] * channel.rows[x][y];
  double bits = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x)
    for (int y = 0; y < ny; ++y) {
      double w = channel.rows[x][y];
      if (w > 0.0 && qy[y] > 0.0) bits += px[x] * w * std::log2(w / qy[y]);
    }
  return std::max(0.0, bits);
}

RdCurveSolver::RdCurveSolver(std::vector<RdBranch> branches, Tolerances tol)
    : branches_(std::move(branches)), tol_(tol) {
  if (branches_.empty()) fail(Errc::DimensionMismatch, "RdCurveSolver: no branches");
  double wsum = 0.0;
  for (auto& b : branches_) {
    if (b.px.empty() || b.cost.size() != b.px.size())
      fail(Errc::DimensionMismatch, "RdCurveSolver: branch shape");
    wsum += b.weight;
  }
  if (wsum <= 0.0) fail(Errc::DimensionMismatch, "RdCurveSolver: zero branch mass");
  for (auto& b : branches_) b.weight /= wsum;

  delta_min_ = 0.0;
  delta_max_ = 0.0;
  for (const auto& b : branches_) {
    double dmin = 0.0;
    for (std::size_t x = 0; x < b.px.size(); ++x)
      dmin += b.px[x] * *std::min_element(b.cost[x].begin(), b.cost[x].end());
    const int ny = static_cast<int>(b.cost[0].size());
    double best_const = std::numeric_limits<double>::infinity();
    for (int y = 0; y < ny; ++y) {
      double e = 0.0;
      for (std::size_t x = 0; x < b.px.size(); ++x) e += b.px[x] * b.cost[x][y];
      best_const = std::min(best_const, e);
    }
    delta_min_ += b.weight * dmin;
    delta_max_ += b.weight * best_const;
  }

  double gap = smallest_positive_cost_gap(branches_);
  flat_ = !std::isfinite(gap) || (delta_max_ - delta_min_) <= 1e-13;
  slope_max_ = flat_ ? 0.0 : 50.0 / gap;
}

const RdCurveSolver::SlopeSolve& RdCurveSolver::eval(double slope) const {
  auto it = cache_.find(slope);
  if (it != cache_.end()) return it->second;
  SlopeSolve s;
  s.channels.reserve(branches_.size());
  for (const auto& b : branches_) {
    BranchSolve bs = ba_branch(b.px, b.cost, slope, tol_, false);
    s.dist += b.weight * bs.dist;
    s.rate += b.weight * bs.rate;
    s.iterations += bs.iterations;
    s.converged = s.converged && bs.converged;
    s.channels.push_back(std::move(bs.channel));
  }
  return cache_.emplace(slope, std::move(s)).first->second;
}

RDPoint RdCurveSolver::zero_rate_point() const {
  RDPoint pt;
  pt.rate = 0.0;
  pt.dist = delta_max_;
  pt.slope = {0.0};
  for (const auto& b : branches_) {
    const int ny = static_cast<int>(b.cost[0].size());
    int best_y = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int y = 0; y < ny; ++y) {
      double e = 0.0;
      for (std::size_t x = 0; x < b.px.size(); ++x) e += b.px[x] * b.cost[x][y];
      if (e < best - 1e-15) {
        best = e;
        best_y = y;
      }
    }
    for (std::size_t x = 0; x < b.px.size(); ++x) {
      std::vector<double> row(ny, 0.0);
      row[best_y] = 1.0;
      pt.channel.rows.push_back(std::move(row));
    }
  }
  return pt;
}

RDPoint RdCurveSolver::point_from(const SlopeSolve& s, double slope, double requested) const {
  RDPoint pt;
  pt.delta = requested;
  pt.dist = s.dist;
  pt.rate = s.rate;
  pt.converged = s.converged;
  pt.iterations = s.iterations;
  pt.slope = {slope};
  for (const auto& ch : s.channels)
    for (const auto& row : ch) pt.channel.rows.push_back(row);
  return pt;
}

double RdCurveSolver::max_rate() const {
  if (flat_) return 0.0;
  return eval(slope_max_).rate;
}

RDPoint RdCurveSolver::at_delta(double delta) const {
  if (delta < delta_min_ - tol_.feas)
    fail(Errc::InfeasibleDelta,
         "delta " + std::to_string(delta) + " below minimum " + std::to_string(delta_min_));
  if (flat_ || delta >= delta_max_ - 1e-15) {
    RDPoint pt = zero_rate_point();
    pt.delta = delta;
    return pt;
  }
  const SlopeSolve& hi = eval(slope_max_);
  if (delta <= hi.dist) return point_from(hi, slope_max_, delta);

  // Bracket: distortion decreases in slope; lo = zero-rate endpoint.
  double s_lo = 0.0, s_hi = slope_max_;
  double d_lo = delta_max_, r_lo = 0.0;
  double d_hi = hi.dist, r_hi = hi.rate;
  const SlopeSolve* hi_solve = &hi;
  for (int i = 0; i < 100 && d_lo - d_hi > 1e-13; ++i) {
    double mid = 0.5 * (s_lo + s_hi);
    const SlopeSolve& sm = eval(mid);
    if (std::abs(sm.dist - delta) <= 1e-12) return point_from(sm, mid, delta);
    if (sm.dist > delta) {
      s_lo = mid;
      d_lo = sm.dist;
      r_lo = sm.rate;
    } else {
      s_hi = mid;
      d_hi = sm.dist;
      r_hi = sm.rate;
      hi_solve = &sm;
    }
  }
  // Linear segment of the curve: interpolate the rate; report the channel
  // from the feasible (distortion <= delta) side.
  RDPoint pt = point_from(*hi_solve, s_hi, delta);
  if (d_lo - d_hi > 1e-15) {
    double t = (delta - d_hi) / (d_lo - d_hi);
    pt.rate = std::max(0.0, r_hi + t * (r_lo - r_hi));
  }
  return pt;
}

double RdCurveSolver::delta_at_rate(double r) const {
  if (flat_) return delta_min_;
  if (r <= 1e-15) return delta_max_;
  const SlopeSolve& top = eval(slope_max_);
  if (r >= top.rate - 1e-12) return delta_min_;

  double s_lo = 0.0, s_hi = slope_max_;
  double r_lo = 0.0, d_lo = delta_max_;
  double r_hi = top.rate, d_hi = top.dist;
  for (int i = 0; i < 100 && r_hi - r_lo > 1e-13; ++i) {
    double mid = 0.5 * (s_lo + s_hi);
    const SlopeSolve& sm = eval(mid);
    if (std::abs(sm.rate - r) <= 1e-12) return sm.dist;
    if (sm.rate < r) {
      s_lo = mid;
      r_lo = sm.rate;
      d_lo = sm.dist;
    } else {
      s_hi = mid;
      r_hi = sm.rate;
      d_hi = sm.dist;
    }
  }
  if (r_hi - r_lo > 1e-15) {
    double t = (r - r_lo) / (r_hi - r_lo);
    return d_lo + t * (d_hi - d_lo);
  }
  return d_hi;
}

RDPoint rd_single(const Pmf& px, const DistortionTable& d_table, double delta,
                  const Tolerances& tol) {
  if (px.size() != d_table.rows.size())
    fail(Errc::DimensionMismatch, "rd_single: |px| != distortion rows");
  RdCurveSolver solver({RdBranch{1.0, px, d_table.rows}}, tol);
  return solver.at_delta(delta);
}

namespace {

// Aggregate distortion of constraint j through per-branch channels.
double constraint_value(const std::vector<SourceBranch>& branches,
                        const std::vector<Matrix>& channels, const MultiConstraint& con) {
  double v = 0.0;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& px = branches[b].px;
    for (std::size_t x = 0; x < px.size(); ++x)
      for (std::size_t y = 0; y < channels[b][x].size(); ++y)
        v += branches[b].weight * px[x] * channels[b][x][y] * con.cost[b][x][y];
  }
  return v;
}

struct MultiInner {
  std::vector<Matrix> channels;
  double rate = 0.0;
  std::vector<double> cons_val;
  bool converged = true;
  int iterations = 0;
};

double weighted_rate(const std::vector<SourceBranch>& branches,
                     const std::vector<Matrix>& channels) {
  double rate = 0.0;
  for (std::size_t b = 0; b < branches.size(); ++b)
    rate += branches[b].weight * mutual_information(branches[b].px, TestChannel{channels[b]});
  return rate;
}

// Conditional-gradient refinement of a feasible point: the objective gradient
// is p(x) log2(W(y|x)/q(y)); each step solves the channel LP at the gradient
// and takes the exact-line-search convex combination.
void frank_wolfe_polish(const std::vector<SourceBranch>& branches,
                        const std::vector<MultiConstraint>& cons, MultiInner& best,
                        const Tolerances& tol) {
  const int ny = static_cast<int>(cons[0].cost[0][0].size());
  int num_rows = 0;
  std::vector<int> offset(branches.size());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    offset[b] = num_rows;
    num_rows += static_cast<int>(branches[b].px.size());
  }
  lp::Problem step;
  step.num_vars = num_rows * ny;
  for (const auto& con : cons) {
    std::vector<double> row(step.num_vars, 0.0);
    for (std::size_t b = 0; b < branches.size(); ++b)
      for (std::size_t x = 0; x < branches[b].px.size(); ++x)
        for (int y = 0; y < ny; ++y)
          row[(offset[b] + static_cast<int>(x)) * ny + y] =
              branches[b].weight * branches[b].px[x] * con.cost[b][x][y];
    step.a_ub.push_back(std::move(row));
    step.b_ub.push_back(con.level);
  }
  for (int r = 0; r < num_rows; ++r) {
    std::vector<double> row(step.num_vars, 0.0);
    for (int y = 0; y < ny; ++y) row[r * ny + y] = 1.0;
    step.a_eq.push_back(std::move(row));
    step.b_eq.push_back(1.0);
  }

  for (int it = 0; it < 30; ++it) {
    step.objective.assign(step.num_vars, 0.0);
    for (std::size_t b = 0; b < branches.size(); ++b) {
      Pmf qy(ny, 0.0);
      for (std::size_t x = 0; x < branches[b].px.size(); ++x)
        for (int y = 0; y < ny; ++y) qy[y] += branches[b].px[x] * best.channels[b][x][y];
      for (std::size_t x = 0; x < branches[b].px.size(); ++x)
        for (int y = 0; y < ny; ++y)
          step.objective[(offset[b] + static_cast<int>(x)) * ny + y] =
              branches[b].weight * branches[b].px[x] *
              std::log2(std::max(best.channels[b][x][y], 1e-12) / std::max(qy[y], 1e-12));
    }
    lp::Solution v = lp::solve(step);
    if (v.status != lp::Status::Optimal) break;
    std::vector<Matrix> vertex(branches.size());
    for (std::size_t b = 0; b < branches.size(); ++b) {
      vertex[b].assign(branches[b].px.size(), std::vector<double>(ny, 0.0));
      for (std::size_t x = 0; x < branches[b].px.size(); ++x)
        for (int y = 0; y < ny; ++y)
          vertex[b][x][y] = std::max(0.0, v.x[(offset[b] + static_cast<int>(x)) * ny + y]);
    }
    auto blend_rate = [&](double t) {
      std::vector<Matrix> mix = best.channels;
      for (std::size_t b = 0; b < branches.size(); ++b)
        for (std::size_t x = 0; x < mix[b].size(); ++x)
          for (int y = 0; y < ny; ++y)
            mix[b][x][y] = (1.0 - t) * mix[b][x][y] + t * vertex[b][x][y];
      return weighted_rate(branches, mix);
    };
    // golden-section line search on [0, 1]
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, br = 1.0;
    double x1 = br - phi * (br - a), x2 = a + phi * (br - a);
    double f1 = blend_rate(x1), f2 = blend_rate(x2);
    for (int ls = 0; ls < 40; ++ls) {
      if (f1 <= f2) {
        br = x2;
        x2 = x1;
        f2 = f1;
        x1 = br - phi * (br - a);
        f1 = blend_rate(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (br - a);
        f2 = blend_rate(x2);
      }
    }
    double t_star = f1 <= f2 ? x1 : x2;
    double new_rate = std::min(f1, f2);
    if (new_rate >= best.rate - 1e-12) break;
    for (std::size_t b = 0; b < branches.size(); ++b)
      for (std::size_t x = 0; x < best.channels[b].size(); ++x)
        for (int y = 0; y < ny; ++y)
          best.channels[b][x][y] =
              (1.0 - t_star) * best.channels[b][x][y] + t_star * vertex[b][x][y];
    best.rate = new_rate;
  }
  best.rate = weighted_rate(branches, best.channels);
  best.cons_val.resize(cons.size());
  for (std::size_t j = 0; j < cons.size(); ++j)
    best.cons_val[j] = constraint_value(branches, best.channels, cons[j]);
}

MultiInner multi_inner(const std::vector<SourceBranch>& branches,
                       const std::vector<MultiConstraint>& cons, const std::vector<double>& lambda,
                       const Tolerances& tol) {
  MultiInner out;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& px = branches[b].px;
    const int nx = static_cast<int>(px.size());
    const int ny = static_cast<int>(cons[0].cost[b][0].size());
    Matrix combined(nx, std::vector<double>(ny, 0.0));
    for (std::size_t j = 0; j < cons.size(); ++j)
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) combined[x][y] += lambda[j] * cons[j].cost[b][x][y];
    BranchSolve bs = ba_branch(px, combined, 1.0, tol, false);
    out.rate += branches[b].weight * bs.rate;
    out.iterations += bs.iterations;
    out.converged = out.converged && bs.converged;
    out.channels.push_back(std::move(bs.channel));
  }
  out.cons_val.resize(cons.size());
  for (std::size_t j = 0; j < cons.size(); ++j)
    out.cons_val[j] = constraint_value(branches, out.channels, cons[j]);
  return out;
}

// LP feasibility check over all channel entries plus a violation variable
// t >= 0; returns a channel meeting every constraint.
std::vector<Matrix> check_multi_feasible(const std::vector<SourceBranch>& branches,
                                         const std::vector<MultiConstraint>& cons,
                                         const Tolerances& tol) {
  int num_rows = 0;
  std::vector<int> offset(branches.size());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    offset[b] = num_rows;
    num_rows += static_cast<int>(branches[b].px.size());
  }
  const int ny = static_cast<int>(cons[0].cost[0][0].size());
  lp::Problem prob;
  prob.num_vars = num_rows * ny + 1;
  const int t_var = num_rows * ny;
  prob.objective.assign(prob.num_vars, 0.0);
  prob.objective[t_var] = 1.0;
  for (std::size_t j = 0; j < cons.size(); ++j) {
    std::vector<double> row(prob.num_vars, 0.0);
    for (std::size_t b = 0; b < branches.size(); ++b)
      for (std::size_t x = 0; x < branches[b].px.size(); ++x)
        for (int y = 0; y < ny; ++y)
          row[(offset[b] + static_cast<int>(x)) * ny + y] =
              branches[b].weight * branches[b].px[x] * cons[j].cost[b][x][y];
    row[t_var] = -1.0;
    prob.a_ub.push_back(std::move(row));
    prob.b_ub.push_back(cons[j].level);
  }
  for (int r = 0; r < num_rows; ++r) {
    std::vector<double> row(prob.num_vars, 0.0);
    for (int y = 0; y < ny; ++y) row[r * ny + y] = 1.0;
    prob.a_eq.push_back(std::move(row));
    prob.b_eq.push_back(1.0);
  }
  lp::Solution sol = lp::solve(prob);
  if (sol.status != lp::Status::Optimal || sol.value > tol.feas)
    fail(Errc::Infeasible, "no channel satisfies all distortion constraints");
  std::vector<Matrix> channels;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    Matrix W(branches[b].px.size(), std::vector<double>(ny, 0.0));
    for (std::size_t x = 0; x < branches[b].px.size(); ++x) {
      double s = 0.0;
      for (int y = 0; y < ny; ++y) {
        W[x][y] = std::max(0.0, sol.x[(offset[b] + static_cast<int>(x)) * ny + y]);
        s += W[x][y];
      }
      if (s <= 0.0) {
        W[x][0] = 1.0;
        s = 1.0;
      }
      for (double& v : W[x]) v /= s;
    }
    channels.push_back(std::move(W));
  }
  return channels;
}

}  // namespace

RDPoint rd_multi(const std::vector<SourceBranch>& branches,
                 const std::vector<MultiConstraint>& cons, const Tolerances& tol) {
  if (branches.empty() || cons.empty())
    fail(Errc::DimensionMismatch, "rd_multi: empty branches or constraints");
  for (const auto& c : cons)
    if (c.cost.size() != branches.size())
      fail(Errc::DimensionMismatch, "rd_multi: constraint branch count");

  double max_level = cons[0].level;
  for (const auto& c : cons) max_level = std::max(max_level, c.level);

  // Single constraint is exactly the slope-parameterized problem.
  if (cons.size() == 1) {
    std::vector<RdBranch> rb;
    for (std::size_t b = 0; b < branches.size(); ++b)
      rb.push_back({branches[b].weight, branches[b].px, cons[0].cost[b]});
    RdCurveSolver solver(std::move(rb), tol);
    return solver.at_delta(cons[0].level);
  }

  std::vector<Matrix> anchor = check_multi_feasible(branches, cons, tol);

  const std::size_t nj = cons.size();
  std::vector<double> lambda(nj, 0.0);
  int total_iters = 0;
  bool dual_capped = false;

  // Pool of inner solutions; the final answer is the best feasible mixture.
  struct Column {
    std::vector<Matrix> channels;
    double rate;
    std::vector<double> cons_val;
  };
  std::vector<Column> pool;
  auto pooled = [&](const std::vector<double>& lam) {
    MultiInner s = multi_inner(branches, cons, lam, tol);
    total_iters += s.iterations;
    pool.push_back({s.channels, s.rate, s.cons_val});
    return s;
  };
  {
    std::vector<double> av(nj);
    double rate = 0.0;
    for (std::size_t b = 0; b < branches.size(); ++b)
      rate += branches[b].weight *
              mutual_information(branches[b].px, TestChannel{anchor[b]});
    for (std::size_t j = 0; j < nj; ++j)
      av[j] = constraint_value(branches, anchor, cons[j]);
    pool.push_back({anchor, rate, av});
  }

  MultiInner cur = pooled(lambda);
  auto feasible = [&](const MultiInner& s) {
    for (std::size_t j = 0; j < nj; ++j)
      if (s.cons_val[j] > cons[j].level + tol.feas) return false;
    return true;
  };

  // Dual coordinate ascent locates the multipliers; each coordinate is set by
  // bisection on its own constraint value, which decreases in lambda_j.
  for (int sweep = 0; sweep < 8; ++sweep) {
    bool any_change = false;
    for (std::size_t j = 0; j < nj; ++j) {
      double saved = lambda[j];
      lambda[j] = 0.0;
      MultiInner at_zero = pooled(lambda);
      if (at_zero.cons_val[j] <= cons[j].level + 0.5 * tol.feas) {
        cur = std::move(at_zero);
        if (std::abs(saved) > 1e-9) any_change = true;
        continue;
      }
      double lo = 0.0, hi = std::max(1.0, 2.0 * saved);
      for (int grow = 0; grow < 40; ++grow) {
        lambda[j] = hi;
        MultiInner at_hi = pooled(lambda);
        if (at_hi.cons_val[j] <= cons[j].level) {
          cur = std::move(at_hi);
          break;
        }
        lo = hi;
        hi *= 2.0;
        if (hi > 1e9) {
          dual_capped = true;
          break;
        }
      }
      for (int i = 0; i < 60 && hi - lo > 1e-11 * (1.0 + hi); ++i) {
        double mid = 0.5 * (lo + hi);
        lambda[j] = mid;
        MultiInner at_mid = pooled(lambda);
        if (at_mid.cons_val[j] > cons[j].level) {
          lo = mid;
        } else {
          hi = mid;
          cur = std::move(at_mid);
        }
      }
      lambda[j] = hi;
      if (std::abs(hi - saved) > 1e-7 * (1.0 + hi)) any_change = true;
    }
    if (!any_change) break;
  }

  // Perturbation probes around the located multipliers: on a degenerate dual
  // face the inner solution jumps between extreme channels, and the nearby
  // probes capture both sides for the mixture step below.
  for (std::size_t j = 0; j < nj; ++j) {
    if (lambda[j] <= 0.0) continue;
    for (double bump : {1.0 + 1e-6, 1.0 - 1e-6}) {
      std::vector<double> probe = lambda;
      probe[j] *= bump;
      pooled(probe);
    }
  }

  // Dual value at the located multipliers certifies the mixture from below.
  double dual_value = cur.rate;
  for (std::size_t j = 0; j < nj; ++j)
    dual_value += lambda[j] * (cur.cons_val[j] - cons[j].level);

  // Best feasible mixture of pooled channels (upper bound by convexity of
  // mutual information in the channel; the anchor column keeps it feasible).
  lp::Problem mix;
  mix.num_vars = static_cast<int>(pool.size());
  mix.objective.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) mix.objective[i] = pool[i].rate;
  for (std::size_t j = 0; j < nj; ++j) {
    std::vector<double> row(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) row[i] = pool[i].cons_val[j];
    mix.a_ub.push_back(std::move(row));
    mix.b_ub.push_back(cons[j].level);
  }
  mix.a_eq.push_back(std::vector<double>(pool.size(), 1.0));
  mix.b_eq.push_back(1.0);
  lp::Solution alpha = lp::solve(mix);

  MultiInner best = std::move(cur);
  if (alpha.status == lp::Status::Optimal) {
    MultiInner mixed;
    mixed.converged = true;
    for (std::size_t b = 0; b < branches.size(); ++b) {
      Matrix W(branches[b].px.size(),
               std::vector<double>(cons[0].cost[b][0].size(), 0.0));
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (alpha.x[i] <= 1e-12) continue;
        for (std::size_t x = 0; x < W.size(); ++x)
          for (std::size_t y = 0; y < W[x].size(); ++y)
            W[x][y] += alpha.x[i] * pool[i].channels[b][x][y];
      }
      mixed.rate += branches[b].weight * mutual_information(branches[b].px, TestChannel{W});
      mixed.channels.push_back(std::move(W));
    }
    mixed.cons_val.resize(nj);
    for (std::size_t j = 0; j < nj; ++j)
      mixed.cons_val[j] = constraint_value(branches, mixed.channels, cons[j]);
    if (feasible(mixed) && (!feasible(best) || mixed.rate <= best.rate)) best = std::move(mixed);
  }

  if (feasible(best)) frank_wolfe_polish(branches, cons, best, tol);

  RDPoint pt;
  pt.delta = max_level;
  pt.rate = best.rate;
  pt.converged = !dual_capped && best.converged && feasible(best) &&
                 best.rate - dual_value <= std::max(tol.gap, 1e-4);
  pt.iterations = total_iters;
  pt.slope = lambda;
  for (const auto& ch : best.channels)
    for (const auto& row : ch) pt.channel.rows.push_back(row);
  double dist = 0.0;
  for (std::size_t j = 0; j < nj; ++j) dist = std::max(dist, best.cons_val[j]);
  pt.dist = dist;
  return pt;
}

RDPoint rd_multi(const Pmf& px, const std::vector<std::pair<DistortionTable, double>>& constraints,
                 const Tolerances& tol) {
  std::vector<SourceBranch> branches{{1.0, px}};
  std::vector<MultiConstraint> cons;
  for (const auto& [table, level] : constraints) cons.push_back({{table.rows}, level});
  return rd_multi(branches, cons, tol);
}

namespace {

void enumerate_rows(int ny, int grid_q, std::vector<Pmf>& out) {
  Pmf row(ny, 0.0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == ny - 1) {
      row[pos] = static_cast<double>(left) / grid_q;
      out.push_back(row);
      return;
    }
    for (int take = 0; take <= left; ++take) {
      row[pos] = static_cast<double>(take) / grid_q;
      self(self, pos + 1, left - take);
    }
  };
  rec(rec, 0, grid_q);
}

std::optional<double> oracle_impl(const Pmf& px,
                                  const std::vector<std::pair<Matrix, double>>& cons, int grid_q) {
  const int nx = static_cast<int>(px.size());
  const int ny = static_cast<int>(cons[0].first[0].size());
  if (nx > 4 || ny > 4) fail(Errc::TooLarge, "rd_oracle: alphabets larger than 4");
  if (grid_q < 1 || grid_q > 64) fail(Errc::TooLarge, "rd_oracle: grid_q out of range");

  std::vector<Pmf> row_choices;
  enumerate_rows(ny, grid_q, row_choices);
  double total = 1.0;
  for (int x = 0; x < nx; ++x) total *= static_cast<double>(row_choices.size());
  if (total > 2.0e7) fail(Errc::TooLarge, "rd_oracle: too many quantized channels");

  std::vector<std::size_t> pick(nx, 0);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  while (true) {
    bool ok = true;
    for (const auto& [table, level] : cons) {
      double e = 0.0;
      for (int x = 0; x < nx; ++x) {
        const Pmf& row = row_choices[pick[x]];
        for (int y = 0; y < ny; ++y) e += px[x] * row[y] * table[x][y];
      }
      if (e > level + 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) {
      Pmf qy(ny, 0.0);
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) qy[y] += px[x] * row_choices[pick[x]][y];
      double bits = 0.0;
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
          double w = row_choices[pick[x]][y];
          if (w > 0.0 && qy[y] > 0.0) bits += px[x] * w * std::log2(w / qy[y]);
        }
      if (bits < best) {
        best = bits;
        found = true;
      }
    }
    int pos = nx - 1;
    while (pos >= 0 && ++pick[pos] == row_choices.size()) pick[pos--] = 0;
    if (pos < 0) break;
  }
  if (!found) return std::nullopt;
  return std::max(0.0, best);
}

}  // namespace

std::optional<double> rd_oracle(const Pmf& px, const Matrix& d, double delta, int grid_q) {
  return oracle_impl(px, {{d, delta}}, grid_q);
}

std::optional<double> rd_oracle_multi(const Pmf& px,
                                      const std::vector<std::pair<Matrix, double>>& constraints,
                                      int grid_q) {
  return oracle_impl(px, constraints, grid_q);
}

}  // namespace usrd
