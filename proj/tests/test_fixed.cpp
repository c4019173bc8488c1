#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "usrd/errors.hpp"
#include "usrd/fixed.hpp"

using namespace usrd;
using namespace testsup;

TEST_CASE("rho_fs with one theta reduces to the known-pmf solver") {
  SourceModel single = load_model(data_path("single_theta.json"));
  for (double delta : {0.25, 0.35, 0.42}) {
    RDPoint bayes = rho_fs(single, {0}, {0}, delta, Setting::Bayes);
    RDPoint nonbayes = rho_fs(single, {0}, {0}, delta, Setting::NonBayes);
    Pmf px = single.marginal({1.0}, {0});
    RDPoint direct = rd_single(px, modified_distortion(single, {0}, {0}), delta);
    CHECK(bayes.rate == doctest::Approx(direct.rate).epsilon(1e-9));
    CHECK(nonbayes.rate == doctest::Approx(direct.rate).epsilon(1e-9));
  }
}

TEST_CASE("Bayes rho never exceeds nonBayes rho on a shared cell") {
  // One Theta1 cell with two conditionals: averaged vs per-tau constraints.
  SourceModel m = make_model2({bsc_joint(0.3, 0.1), bsc_joint(0.3, 0.2)},
                              pair_error_distortion(), {0.5, 0.5});
  AmbiguityPartition part = theta1_partition(m, {0});
  REQUIRE(part.num_cells() == 1);
  for (double delta : {0.3, 0.4}) {
    double b = rho_fs(m, {0}, part.cells[0], delta, Setting::Bayes).rate;
    double n = rho_fs(m, {0}, part.cells[0], delta, Setting::NonBayes).rate;
    CHECK(b <= n + 1e-6);
  }
}

TEST_CASE("virtual-BSC Bayesian cell matches the closed form") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  for (double delta : {0.15, 0.2, 0.3}) {
    RDPoint cell1 = rho_fs(bsc, {0}, {0}, delta, Setting::Bayes);
    RDPoint cell2 = rho_fs(bsc, {0}, {1}, delta, Setting::Bayes);
    CHECK(cell1.rate == doctest::Approx(clamped_rate(0.2, (delta - 0.1) / 0.9)).epsilon(1e-3));
    CHECK(cell2.rate == doctest::Approx(clamped_rate(0.4, (delta - 0.1) / 0.9)).epsilon(1e-3));
  }
}

TEST_CASE("usrdf_fs endpoints and the single-cell collapse") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  auto [dmin, dmax] = delta_bounds_fs(bsc, {0}, Setting::Bayes);
  CHECK(usrdf_fs(bsc, {0}, dmax, Setting::Bayes).rate == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_WITH_AS(usrdf_fs(bsc, {0}, dmin - 1e-3, Setting::Bayes),
                       doctest::Contains("DeltaOutOfRange"), Error);

  // |Theta1| = 1: the minmax collapses to a single rho evaluation.
  SourceModel merged = make_model2({bsc_joint(0.3, 0.1), bsc_joint(0.3, 0.2)},
                                   pair_error_distortion(), {0.5, 0.5});
  double Delta = 0.35;
  UsrdfResult u = usrdf_fs(merged, {0}, Delta, Setting::Bayes);
  RDPoint rho = rho_fs(merged, {0}, {0, 1}, Delta, Setting::Bayes);
  CHECK(u.rate == doctest::Approx(rho.rate).epsilon(1e-7));
}

TEST_CASE("usrdf_fs Bayes matches an independent allocation search on the virtual-BSC family") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  for (double Delta : {0.15, 0.22, 0.3}) {
    UsrdfResult solver = usrdf_fs(bsc, {0}, Delta, Setting::Bayes);
    auto value = [&](double d1) {
      double d2 = 2.0 * Delta - d1;  // uniform prior
      if (d2 < 0.1) return 1e9;
      return std::max(clamped_rate(0.2, (d1 - 0.1) / 0.9), clamped_rate(0.4, (d2 - 0.1) / 0.9));
    };
    double oracle = minimize_scalar(value, 0.1, 0.37, 2000);
    CHECK(solver.rate == doctest::Approx(oracle).epsilon(1e-3));
  }
}

TEST_CASE("the returned allocation is an equalizing certificate") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  double Delta = 0.2;
  UsrdfResult u = usrdf_fs(bsc, {0}, Delta, Setting::Bayes);
  REQUIRE(u.allocation.has_value());
  AmbiguityPartition part = theta1_partition(bsc, {0});
  double avg = 0.0;
  for (int c = 0; c < part.num_cells(); ++c) {
    double dc = u.allocation->delta_per_cell[c];
    avg += part.induced_prior[c] * dc;
    auto curve = fs_cell_curve(bsc, {0}, part.cells[c], {});
    double rate_c = curve->at_delta(dc).rate;
    bool at_rate_level = std::abs(rate_c - u.rate) <= 1e-5;
    bool clamped = dc <= curve->delta_min() + 1e-9;
    CHECK((at_rate_level || clamped));
  }
  CHECK(avg <= Delta + 1e-7);
}

TEST_CASE("delta bounds match the virtual-BSC closed forms") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  auto [blo, bhi] = delta_bounds_fs(bsc, {0}, Setting::Bayes);
  CHECK(blo == doctest::Approx(0.1).epsilon(1e-9));    // E[q_theta1]
  CHECK(bhi == doctest::Approx(0.37).epsilon(1e-9));   // E[p + q - pq]
  auto [nlo, nhi] = delta_bounds_fs(bsc, {0}, Setting::NonBayes);
  CHECK(nlo == doctest::Approx(0.1).epsilon(1e-9));    // max_tau q_tau
  CHECK(nhi == doctest::Approx(0.46).epsilon(1e-9));   // max_tau (p + q - pq)
}

TEST_CASE("A = B with error distortion observes everything") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  auto [lo, hi] = delta_bounds_fs(bsc, {0, 1}, Setting::Bayes);
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hi > 0.0);
}

TEST_CASE("usrdf_fs is monotone and convex in Delta; nonBayes dominates Bayes") {
  SourceModel bsc = load_model(data_path("bsc_family.json"));
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(0.12 + (0.36 - 0.12) * i / 8.0);
  std::vector<double> bayes, nonbayes;
  for (double Delta : grid) {
    bayes.push_back(usrdf_fs(bsc, {0}, Delta, Setting::Bayes).rate);
    nonbayes.push_back(usrdf_fs(bsc, {0}, Delta, Setting::NonBayes).rate);
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(bayes[i] <= bayes[i - 1] + 1e-6);
    CHECK(nonbayes[i] <= nonbayes[i - 1] + 1e-6);
  }
  for (std::size_t i = 1; i + 1 < grid.size(); ++i)
    CHECK(bayes[i] <= 0.5 * (bayes[i - 1] + bayes[i + 1]) + 1e-6);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(bayes[i] <= nonbayes[i] + 1e-6);
}

TEST_CASE("xor-triple family: sampling the parity component is the only way below q-bar") {
  SourceModel xor3 = load_model(data_path("xor_triple.json"));
  double q_bar = 0.15;  // E[q_tau] up to the 1e-6 support mix

  auto [lo1, hi1] = delta_bounds_fs(xor3, {0}, Setting::Bayes);
  auto [lo3, hi3] = delta_bounds_fs(xor3, {2}, Setting::Bayes);
  CHECK(lo1 == doctest::Approx(q_bar).epsilon(1e-4));
  CHECK(lo3 == doctest::Approx(0.0).epsilon(1e-4));

  // On the common range both rates coincide (R_{3} <= R_{1} with equality).
  for (double Delta : {0.2, 0.3}) {
    double r1 = usrdf_fs(xor3, {0}, Delta, Setting::Bayes).rate;
    double r3 = usrdf_fs(xor3, {2}, Delta, Setting::Bayes).rate;
    CHECK(r3 <= r1 + 1e-6);
  }
  // Strictly below q-bar only {3} answers.
  BestFixedSet best = best_fixed_set(xor3, 1, 0.05, Setting::Bayes);
  CHECK(best.set == std::vector<int>{2});
  CHECK(best.rate > 0.0);
}

TEST_CASE("best_fixed_set tie-breaks lexicographically and handles k = m") {
  SourceModel sym = make_model2({indep_joint(0.2, 0.2)}, additive_hamming(), {1.0});
  BestFixedSet tie = best_fixed_set(sym, 1, 0.3, Setting::Bayes);
  CHECK(tie.set == std::vector<int>{0});

  SourceModel bsc = load_model(data_path("bsc_family.json"));
  BestFixedSet full = best_fixed_set(bsc, 2, 0.2, Setting::Bayes);
  CHECK(full.set == std::vector<int>{0, 1});

  CHECK_THROWS_WITH_AS(best_fixed_set(bsc, 1, 0.0, Setting::Bayes),
                       doctest::Contains("NoFeasibleSet"), Error);
}

TEST_CASE("both settings coincide for a single-theta family") {
  SourceModel single = load_model(data_path("single_theta.json"));
  auto [blo, bhi] = delta_bounds_fs(single, {0}, Setting::Bayes);
  auto [nlo, nhi] = delta_bounds_fs(single, {0}, Setting::NonBayes);
  CHECK(blo == doctest::Approx(nlo).epsilon(1e-12));
  CHECK(bhi == doctest::Approx(nhi).epsilon(1e-12));
  for (double Delta : {0.3, 0.4}) {
    double b = usrdf_fs(single, {0}, Delta, Setting::Bayes).rate;
    double n = usrdf_fs(single, {0}, Delta, Setting::NonBayes).rate;
    CHECK(b == doctest::Approx(n).epsilon(1e-9));
  }
}
