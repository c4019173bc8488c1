#pragma once

#include <vector>

namespace usrd::lp {

// Small dense linear program in the form
//   minimize    c'x
//   subject to  A_ub x <= b_ub,  A_eq x == b_eq,  x >= 0.
// Solved by a two-phase primal simplex with Bland's rule. Intended for the
// desk-scale programs this library produces (tens of rows, up to a few
// thousand columns).
struct Problem {
  int num_vars = 0;
  std::vector<double> objective;              // length num_vars
  std::vector<std::vector<double>> a_ub;      // each row length num_vars
  std::vector<double> b_ub;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
};

enum class Status { Optimal, Infeasible, Unbounded };

struct Solution {
  Status status = Status::Infeasible;
  double value = 0.0;
  std::vector<double> x;
};

Solution solve(const Problem& prob, double eps = 1e-9);

}  // namespace usrd::lp
