#include "usrd/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "usrd/errors.hpp"

namespace usrd::lp {
namespace {

// Standard-form tableau: rows are equalities after slacks are added, columns
// are structural vars + slacks + one artificial per row + RHS. Reduced costs
// are recomputed from the basis every iteration (the row count stays small
// here, so freshness beats the incremental update's drift).
class Tableau {
 public:
  Tableau(const Problem& p, double eps) : eps_(eps) {
    n_ = p.num_vars;
    m_ = static_cast<int>(p.a_ub.size() + p.a_eq.size());
    num_slack_ = static_cast<int>(p.a_ub.size());
    cols_ = n_ + num_slack_ + m_;
    t_.assign(m_, std::vector<double>(cols_ + 1, 0.0));
    basis_.assign(m_, -1);

    int row = 0;
    for (std::size_t i = 0; i < p.a_ub.size(); ++i, ++row) {
      for (int j = 0; j < n_; ++j) t_[row][j] = p.a_ub[i][j];
      t_[row][n_ + row] = 1.0;
      t_[row][cols_] = p.b_ub[i];
    }
    for (std::size_t i = 0; i < p.a_eq.size(); ++i, ++row) {
      for (int j = 0; j < n_; ++j) t_[row][j] = p.a_eq[i][j];
      t_[row][cols_] = p.b_eq[i];
    }
    for (int r = 0; r < m_; ++r) {
      if (t_[r][cols_] < 0.0)
        for (int j = 0; j <= cols_; ++j) t_[r][j] = -t_[r][j];
      int art = n_ + num_slack_ + r;
      t_[r][art] = 1.0;
      basis_[r] = art;
    }
  }

  enum class RunStatus { Optimal, Unbounded, IterLimit };

  RunStatus run(const std::vector<double>& cost, int first_allowed_cols) {
    std::vector<double> cb(m_);
    std::vector<double> z(first_allowed_cols);
    double last_objective = std::numeric_limits<double>::infinity();
    int stalled = 0;
    bool bland = false;
    const long long max_iters = 200000;
    for (long long iter = 0; iter < max_iters; ++iter) {
      double objective = 0.0;
      for (int r = 0; r < m_; ++r) {
        cb[r] = basis_[r] < static_cast<int>(cost.size()) ? cost[basis_[r]] : 0.0;
        objective += cb[r] * t_[r][cols_];
      }
      if (objective < last_objective - 1e-12) {
        last_objective = objective;
        stalled = 0;
      } else if (++stalled > 64) {
        bland = true;  // degenerate plateau: Bland's rule guarantees exit
      }

      int enter = -1;
      double most_negative = -eps_;
      for (int j = 0; j < first_allowed_cols; ++j) {
        double zj = (j < static_cast<int>(cost.size()) ? cost[j] : 0.0);
        for (int r = 0; r < m_; ++r) zj -= cb[r] * t_[r][j];
        z[j] = zj;
        if (bland) {
          if (zj < -eps_) {
            enter = j;
            break;
          }
        } else if (zj < most_negative) {
          most_negative = zj;
          enter = j;
        }
      }
      if (enter < 0) return RunStatus::Optimal;

      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        if (t_[r][enter] > eps_) {
          double ratio = t_[r][cols_] / t_[r][enter];
          if (ratio < best_ratio - eps_ ||
              (ratio < best_ratio + eps_ && (leave < 0 || basis_[r] < basis_[leave]))) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return RunStatus::Unbounded;
      pivot(leave, enter);
    }
    return RunStatus::IterLimit;
  }

  void pivot(int r, int c) {
    double piv = t_[r][c];
    for (int j = 0; j <= cols_; ++j) t_[r][j] /= piv;
    t_[r][c] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double f = t_[i][c];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) t_[i][j] -= f * t_[r][j];
      t_[i][c] = 0.0;
    }
    basis_[r] = c;
  }

  // After phase 1: pivot zero-level artificials onto real columns, and drop
  // rows that are redundant (no real coefficient left). Leaving an artificial
  // basic would let later pivots push it positive and silently break
  // feasibility.
  void expel_or_drop_artificials() {
    for (int r = 0; r < m_; ) {
      if (basis_[r] < n_ + num_slack_) {
        ++r;
        continue;
      }
      int pivot_col = -1;
      for (int j = 0; j < n_ + num_slack_; ++j)
        if (std::abs(t_[r][j]) > 1e-7) {
          pivot_col = j;
          break;
        }
      if (pivot_col >= 0) {
        pivot(r, pivot_col);
        ++r;
      } else {
        t_.erase(t_.begin() + r);
        basis_.erase(basis_.begin() + r);
        --m_;
      }
    }
  }

  double artificial_mass() const {
    double s = 0.0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= n_ + num_slack_) s += t_[r][cols_];
    return s;
  }

  int n() const { return n_; }
  int num_slack() const { return num_slack_; }
  int cols() const { return cols_; }
  int rows() const { return m_; }
  double rhs(int r) const { return t_[r][cols_]; }
  int basis(int r) const { return basis_[r]; }

 private:
  double eps_;
  int n_ = 0, m_ = 0, num_slack_ = 0, cols_ = 0;
  std::vector<std::vector<double>> t_;
  std::vector<int> basis_;
};

}  // namespace

Solution solve(const Problem& prob, double eps) {
  for (const auto& row : prob.a_ub)
    if (static_cast<int>(row.size()) != prob.num_vars)
      fail(Errc::DimensionMismatch, "lp: a_ub row width");
  for (const auto& row : prob.a_eq)
    if (static_cast<int>(row.size()) != prob.num_vars)
      fail(Errc::DimensionMismatch, "lp: a_eq row width");

  Tableau tab(prob, eps);
  const int n = tab.n(), ns = tab.num_slack(), cols = tab.cols();

  // Phase 1: minimize the artificial mass over all columns.
  std::vector<double> phase1_cost(cols, 0.0);
  for (int j = n + ns; j < cols; ++j) phase1_cost[j] = 1.0;
  Tableau::RunStatus st = tab.run(phase1_cost, cols);
  if (st == Tableau::RunStatus::IterLimit) fail(Errc::TooLarge, "lp: phase-1 iteration limit");
  if (tab.artificial_mass() > 1e-7) return {Status::Infeasible, 0.0, {}};
  tab.expel_or_drop_artificials();

  // Phase 2 over structural + slack columns only.
  std::vector<double> cost(n, 0.0);
  for (int j = 0; j < n; ++j) cost[j] = prob.objective[j];
  st = tab.run(cost, n + ns);
  if (st == Tableau::RunStatus::IterLimit) fail(Errc::TooLarge, "lp: phase-2 iteration limit");
  if (st == Tableau::RunStatus::Unbounded) return {Status::Unbounded, 0.0, {}};

  Solution sol;
  sol.status = Status::Optimal;
  sol.x.assign(n, 0.0);
  for (int r = 0; r < tab.rows(); ++r)
    if (tab.basis(r) < n) sol.x[tab.basis(r)] = std::max(0.0, tab.rhs(r));
  sol.value = 0.0;
  for (int j = 0; j < n; ++j) sol.value += prob.objective[j] * sol.x[j];
  return sol;
}

}  // namespace usrd::lp
