#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "usrd/errors.hpp"
#include "usrd/rd.hpp"

using namespace usrd;
using namespace testsup;

namespace {

DistortionTable hamming2() { return {{{0.0, 1.0}, {1.0, 0.0}}, "binary"}; }

Matrix random_cost(std::mt19937_64& rng, int nx, int ny, double scale = 2.0) {
  Matrix c(nx, std::vector<double>(ny));
  for (auto& row : c)
    for (double& v : row) v = scale * (rng() % 1000) / 1000.0;
  return c;
}

Pmf random_pmf(std::mt19937_64& rng, int n) {
  Pmf p(n);
  double s = 0.0;
  for (double& v : p) {
    v = 0.05 + (rng() % 1000) / 1000.0;
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("mutual information basics") {
  TestChannel identity{{{1.0, 0.0}, {0.0, 1.0}}};
  CHECK(mutual_information({0.5, 0.5}, identity) == doctest::Approx(1.0));

  TestChannel constant{{{0.3, 0.7}, {0.3, 0.7}}};
  CHECK(mutual_information({0.4, 0.6}, constant) == doctest::Approx(0.0));

  TestChannel bsc{{{0.89, 0.11}, {0.11, 0.89}}};
  CHECK(mutual_information({0.5, 0.5}, bsc) == doctest::Approx(1.0 - h(0.11)).epsilon(1e-9));

  CHECK_THROWS_AS(mutual_information({0.5, 0.5}, TestChannel{{{1.0, 0.0}}}), Error);
}

TEST_CASE("rd_single matches the binary Hamming closed form") {
  RDPoint pt = rd_single({0.5, 0.5}, hamming2(), 0.11);
  CHECK(pt.rate == doctest::Approx(1.0 - h(0.11)).epsilon(1e-6));
  CHECK(pt.dist == doctest::Approx(0.11).epsilon(1e-6));
  CHECK(pt.converged);
  CHECK(pt.channel.valid());

  // biased source at delta = 0.05: h(0.1) - h(0.05)
  RDPoint biased = rd_single({0.9, 0.1}, hamming2(), 0.05);
  CHECK(biased.rate == doctest::Approx(h(0.1) - h(0.05)).epsilon(1e-6));
}

TEST_CASE("rd_single endpoints") {
  // delta at Delta_max: zero rate through the constant channel
  RDPoint zero = rd_single({0.5, 0.5}, hamming2(), 0.5);
  CHECK(zero.rate == doctest::Approx(0.0));
  CHECK(zero.channel.rows[0] == zero.channel.rows[1]);

  // just below Delta_max the rate is strictly positive
  RDPoint near = rd_single({0.5, 0.5}, hamming2(), 0.49);
  CHECK(near.rate > 1e-5);

  CHECK_THROWS_WITH_AS(rd_single({0.5, 0.5}, hamming2(), -0.01),
                       doctest::Contains("InfeasibleDelta"), Error);
}

TEST_CASE("alternating-minimization objective is nonincreasing") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    Pmf px = random_pmf(rng, 3);
    Matrix cost = random_cost(rng, 3, 3);
    solve_branch_traced(px, cost, 1.0 + (rng() % 100) / 10.0);
    const auto& trace = last_lagrangian_trace();
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-10);
  }
}

TEST_CASE("rd_single curve is nonincreasing and midpoint convex") {
  std::mt19937_64 rng(23);
  Pmf px = random_pmf(rng, 3);
  DistortionTable table{random_cost(rng, 3, 3), "random"};
  RdCurveSolver curve({RdBranch{1.0, px, table.rows}});
  double lo = curve.delta_min(), hi = curve.delta_max();
  std::vector<double> deltas, rates;
  for (int i = 0; i <= 10; ++i) {
    double d = lo + (hi - lo) * i / 10.0;
    deltas.push_back(d);
    rates.push_back(curve.at_delta(d).rate);
  }
  for (std::size_t i = 1; i < rates.size(); ++i) CHECK(rates[i] <= rates[i - 1] + 1e-6);
  for (std::size_t i = 1; i + 1 < rates.size(); ++i) {
    double chord = 0.5 * (rates[i - 1] + rates[i + 1]);
    CHECK(rates[i] <= chord + 1e-6);  // uniform grid: chord check = midpoint check
  }
}

TEST_CASE("delta_at_rate inverts the curve") {
  RdCurveSolver curve({RdBranch{1.0, {0.5, 0.5}, hamming2().rows}});
  for (double r : {0.1, 0.3, 0.7}) {
    double d = curve.delta_at_rate(r);
    CHECK(curve.at_delta(d).rate == doctest::Approx(r).epsilon(1e-6));
  }
  CHECK(curve.delta_at_rate(0.0) == doctest::Approx(curve.delta_max()));
  CHECK(curve.delta_at_rate(curve.max_rate() + 1.0) == doctest::Approx(curve.delta_min()));
}

TEST_CASE("rd_multi reduces to rd_single for one or duplicated constraints") {
  Pmf px{0.8, 0.2};
  DistortionTable t = hamming2();
  RDPoint single = rd_single(px, t, 0.08);
  RDPoint one = rd_multi(px, {{t, 0.08}});
  RDPoint dup = rd_multi(px, {{t, 0.08}, {t, 0.08}});
  CHECK(one.rate == doctest::Approx(single.rate).epsilon(1e-6));
  CHECK(dup.rate == doctest::Approx(single.rate).epsilon(2e-5));
}

TEST_CASE("rd_multi matches the two-constraint closed form") {
  // Virtual-BSC cell with two conditionals q=0.1, q=0.2 sharing p = 0.2:
  // rate = h(p) - min_tau h((delta - q_tau) / (1 - q_tau)).
  Pmf px{0.8, 0.2};
  DistortionTable c1{{{0.1, 0.9, 1.0, 1.0}, {1.0, 1.0, 0.9, 0.1}}, "x1"};
  DistortionTable c2{{{0.2, 0.8, 1.0, 1.0}, {1.0, 1.0, 0.8, 0.2}}, "x1"};
  for (double delta : {0.25, 0.3, 0.35}) {
    RDPoint pt = rd_multi(px, {{c1, delta}, {c2, delta}});
    double expect = std::max(
        0.0, h(0.2) - std::min(h((delta - 0.1) / 0.9), h((delta - 0.2) / 0.8)));
    CHECK(pt.rate == doctest::Approx(expect).epsilon(1e-3));
  }
}

TEST_CASE("rd_multi is monotone in the constraint set") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 4; ++rep) {
    Pmf px = random_pmf(rng, 2);
    DistortionTable c1{random_cost(rng, 2, 2, 1.0), "a"};
    DistortionTable c2{random_cost(rng, 2, 2, 1.0), "b"};
    // Levels anchored at a random channel keep both programs feasible.
    double w0 = 0.2 + 0.6 * (rng() % 1000) / 1000.0;
    Matrix ch{{w0, 1.0 - w0}, {1.0 - w0, w0}};
    auto level_of = [&](const Matrix& c) {
      double e = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) e += px[x] * ch[x][y] * c[x][y];
      return e;
    };
    RDPoint sub = rd_multi(px, {{c1, level_of(c1.rows)}});
    RDPoint full = rd_multi(px, {{c1, level_of(c1.rows)}, {c2, level_of(c2.rows)}});
    CHECK(full.rate >= sub.rate - 1e-6);
  }
}

TEST_CASE("rd_multi surfaces infeasibility") {
  Pmf px{0.5, 0.5};
  DistortionTable c1{{{0.0, 1.0}, {1.0, 0.0}}, "a"};
  DistortionTable c2{{{1.0, 0.0}, {0.0, 1.0}}, "b"};  // opposite preferences
  CHECK_THROWS_WITH_AS(rd_multi(px, {{c1, 0.2}, {c2, 0.2}}),
                       doctest::Contains("Infeasible"), Error);
}

TEST_CASE("oracle sits just above the solver on the Hamming instance") {
  Pmf px{0.5, 0.5};
  auto o = rd_oracle(px, hamming2().rows, 0.11, 64);
  REQUIRE(o.has_value());
  double exact = 1.0 - h(0.11);
  CHECK(*o >= exact - 1e-9);
  CHECK(*o <= exact + 2e-2);

  // the constant channel lives in every grid
  CHECK(*rd_oracle(px, hamming2().rows, 0.6, 8) == doctest::Approx(0.0));
}

TEST_CASE("oracle rejects oversized problems") {
  Pmf big(5, 0.2);
  Matrix d(5, std::vector<double>(2, 0.0));
  CHECK_THROWS_WITH_AS(rd_oracle(big, d, 0.1, 16), doctest::Contains("TooLarge"), Error);
}

TEST_CASE("oracle dominance on random instances") {
  std::mt19937_64 rng(97);
  for (int rep = 0; rep < 5; ++rep) {
    Pmf px = random_pmf(rng, 2);
    Matrix cost = random_cost(rng, 2, 2, 1.0);
    RdCurveSolver curve({RdBranch{1.0, px, cost}});
    double delta = curve.delta_min() + 0.4 * (curve.delta_max() - curve.delta_min());
    RDPoint pt = curve.at_delta(delta);
    auto o = rd_oracle(px, cost, delta, 64);
    REQUIRE(o.has_value());
    CHECK(*o >= pt.rate - 1e-6);
    CHECK(*o <= pt.rate + 2e-2);
  }
}

TEST_CASE("oracle dominance holds beyond binary alphabets") {
  std::mt19937_64 rng(321);
  for (int rep = 0; rep < 2; ++rep) {
    Pmf px = random_pmf(rng, 3);
    Matrix cost = random_cost(rng, 3, 3, 1.0);
    RdCurveSolver curve({RdBranch{1.0, px, cost}});
    double delta = curve.delta_min() + 0.5 * (curve.delta_max() - curve.delta_min());
    RDPoint pt = curve.at_delta(delta);
    auto o = rd_oracle(px, cost, delta, 20);
    REQUIRE(o.has_value());
    CHECK(*o >= pt.rate - 1e-6);
    CHECK(*o <= pt.rate + 8e-2);  // coarse 1/20 grid
  }
}
