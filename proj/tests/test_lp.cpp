#include "doctest.h"
#include "usrd/lp.hpp"

using namespace usrd;

TEST_CASE("simplex solves a basic program") {
  // min -x - 2y s.t. x + y <= 4, x <= 3, y <= 2
  lp::Problem p;
  p.num_vars = 2;
  p.objective = {-1.0, -2.0};
  p.a_ub = {{1.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}};
  p.b_ub = {4.0, 3.0, 2.0};
  auto sol = lp::solve(p);
  REQUIRE(sol.status == lp::Status::Optimal);
  CHECK(sol.value == doctest::Approx(-6.0));  // x=2, y=2
}

TEST_CASE("simplex handles equality constraints and degenerate rows") {
  // min t s.t. 0.4a + 0.1b <= t, 0.2a + 0.3b <= t, a + b = 1
  lp::Problem p;
  p.num_vars = 3;
  p.objective = {0.0, 0.0, 1.0};
  p.a_ub = {{0.1, 0.4, -1.0}, {0.3, 0.2, -1.0}};
  p.b_ub = {0.0, 0.0};
  p.a_eq = {{1.0, 1.0, 0.0}};
  p.b_eq = {1.0};
  auto sol = lp::solve(p);
  REQUIRE(sol.status == lp::Status::Optimal);
  CHECK(sol.value == doctest::Approx(0.25).epsilon(1e-9));  // equalized at a=b=1/2
}

TEST_CASE("simplex reports infeasibility") {
  lp::Problem p;
  p.num_vars = 1;
  p.objective = {1.0};
  p.a_ub = {{-1.0}};
  p.b_ub = {-2.0};  // x >= 2
  p.a_eq = {{1.0}};
  p.b_eq = {1.0};  // x == 1
  CHECK(lp::solve(p).status == lp::Status::Infeasible);
}

TEST_CASE("simplex reports unboundedness") {
  lp::Problem p;
  p.num_vars = 2;
  p.objective = {-1.0, 0.0};
  p.a_ub = {{0.0, 1.0}};
  p.b_ub = {1.0};
  CHECK(lp::solve(p).status == lp::Status::Unbounded);
}
