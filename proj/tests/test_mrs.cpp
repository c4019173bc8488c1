#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "usrd/errors.hpp"
#include "usrd/irs.hpp"
#include "usrd/mrs.hpp"

using namespace usrd;
using namespace testsup;

namespace {
const DeterministicSampler kXorMap{{0, 1, 1, 0}};  // {00,11} -> {1}, {01,10} -> {2}
}

TEST_CASE("sampler enumeration counts and contents") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  SamplerEnumeration en = enumerate_pure_samplers(unifc, 1);
  CHECK(en.total_maps == 16);  // 2^4 before dedup
  CHECK(en.samplers.size() < 16);

  auto contains = [&](const std::vector<int>& map) {
    return std::any_of(en.samplers.begin(), en.samplers.end(),
                       [&](const DeterministicSampler& s) { return s.map == map; });
  };
  CHECK(contains(kXorMap.map));          // the parity map, canonical labeling
  CHECK(!contains({1, 0, 0, 1}));        // its relabeling deduplicates away
  CHECK(contains({0, 0, 0, 0}));         // constant maps embed every fixed set
  CHECK(contains({1, 1, 1, 1}));
}

TEST_CASE("enumeration cap is enforced") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  CHECK_THROWS_WITH_AS(enumerate_pure_samplers(unifc, 1, 8),
                       doctest::Contains("TooManySamplers"), Error);
}

TEST_CASE("rho_mrs_pure on the parity map matches h(p) - h(delta)") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  double ps[] = {0.1, 0.3};
  for (int tau = 0; tau < 2; ++tau) {
    for (double delta : {0.02, 0.05, 0.08}) {
      RDPoint pt = rho_mrs_pure(unifc, 1, kXorMap, tau, delta);
      CHECK(pt.rate == doctest::Approx(h(ps[tau]) - h(delta)).epsilon(1e-6));
    }
    // delta = 0: the sampler output determines the pair, rate h(p_tau)
    RDPoint lossless = rho_mrs_pure(unifc, 1, kXorMap, tau, 0.0);
    CHECK(lossless.rate == doctest::Approx(h(ps[tau])).epsilon(1e-6));
  }
}

TEST_CASE("rho_mrs_pure with a constant map equals rho_fs when |Theta| = 1") {
  SourceModel single = load_model(data_path("single_theta.json"));
  DeterministicSampler const1{{0, 0, 0, 0}};
  for (double delta : {0.25, 0.4}) {
    RDPoint mrs = rho_mrs_pure(single, 1, const1, 0, delta);
    RDPoint fs = rho_fs(single, {0}, {0}, delta, Setting::Bayes);
    CHECK(mrs.rate == doctest::Approx(fs.rate).epsilon(1e-12));
  }
}

TEST_CASE("usrdf_mrs nonBayes matches the uniform-component closed form") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  for (double Delta : {0.02, 0.05, 0.1, 0.2}) {
    UsrdfMrsResult res = usrdf_mrs(unifc, 1, Delta, Setting::NonBayes);
    CHECK(res.rate == doctest::Approx(h(0.3) - h(Delta)).epsilon(1e-3));
    for (const auto& slot : res.policy.slots) CHECK(slot.sampler.map == kXorMap.map);
  }
}

TEST_CASE("usrdf_mrs Bayes matches an independent allocation search on the uniform-component family") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  MrsOptions fine;
  fine.grid_points = 129;
  for (double Delta : {0.05, 0.1, 0.15}) {
    UsrdfMrsResult res = usrdf_mrs(unifc, 1, Delta, Setting::Bayes, {}, fine);
    auto value = [&](double d1) {
      double d2 = 2.0 * Delta - d1;
      if (d2 < 0.0) return 1e9;
      return std::max(clamped_rate(0.1, d1), clamped_rate(0.3, d2));
    };
    double oracle = minimize_scalar(value, 0.0, std::min(0.5, 2.0 * Delta), 4000);
    CHECK(res.rate == doctest::Approx(oracle).epsilon(2e-3));
  }
}

TEST_CASE("grid refinement tightens the Bayes value monotonically") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  double Delta = 0.1;
  auto rate_at = [&](int grid) {
    MrsOptions o;
    o.grid_points = grid;
    return usrdf_mrs(unifc, 1, Delta, Setting::Bayes, {}, o).rate;
  };
  double coarse = rate_at(9), mid = rate_at(17), fine = rate_at(33);
  CHECK(mid <= coarse + 1e-9);   // refinement only adds columns
  CHECK(fine <= mid + 1e-9);
}

TEST_CASE("policy support respects the Caratheodory bound and replays its rate") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  double Delta = 0.1;
  UsrdfMrsResult res = usrdf_mrs(unifc, 1, Delta, Setting::Bayes);
  CHECK(res.policy.slots.size() <= 2 * 2 + 1);
  double mass = 0.0, replay = 0.0;
  std::vector<double> per_tau(2, 0.0);
  for (const auto& slot : res.policy.slots) {
    mass += slot.p_u;
    for (int t = 0; t < 2; ++t) {
      RDPoint pt = rho_mrs_pure(unifc, 1, slot.sampler, t, slot.dist_per_tau[t]);
      per_tau[t] += slot.p_u * pt.rate;
    }
  }
  replay = std::max(per_tau[0], per_tau[1]);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(replay <= res.rate + 1e-6);  // snapped points only improve on the LP grid
  CHECK(replay >= res.rate - 5e-3);  // and stay within grid resolution of it
}

TEST_CASE("usrdf_mrs with one theta and full sampling is classical rate distortion") {
  SourceModel single = load_model(data_path("single_theta.json"));
  for (double Delta : {0.2, 0.3}) {
    double mrs = usrdf_mrs(single, 2, Delta, Setting::Bayes).rate;
    DistortionTable table{{}, "joint"};
    table.rows.resize(4);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) table.rows[x].push_back(single.d(x, y));
    double classical = rd_single(single.family[0], table, Delta).rate;
    CHECK(mrs == doctest::Approx(classical).epsilon(1e-6));
  }
}

TEST_CASE("delta bounds: uniform-component hand values") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  auto [blo, bhi] = delta_bounds_mrs(unifc, 1, Setting::Bayes);
  CHECK(blo == doctest::Approx(0.0).epsilon(1e-12));  // parity map recovers the pair
  CHECK(bhi == doctest::Approx(0.2).epsilon(1e-9));   // E[p_theta]
  auto [nlo, nhi] = delta_bounds_mrs(unifc, 1, Setting::NonBayes);
  CHECK(nlo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nhi == doctest::Approx(0.3).epsilon(1e-9));   // max_tau p_tau
}

TEST_CASE("delta bounds: full sampling reaches the exact-recovery floor") {
  SourceModel single = load_model(data_path("single_theta.json"));
  auto [lo, hi] = delta_bounds_mrs(single, 2, Setting::Bayes);
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
  auto [fs_lo, fs_hi] = delta_bounds_fs(single, {0, 1}, Setting::Bayes);
  CHECK(hi == doctest::Approx(fs_hi).epsilon(1e-12));  // single map at k = m

  // At k = 1 instantaneous choice can only lower the rate-0 floor.
  auto [klo, khi] = delta_bounds_mrs(single, 1, Setting::Bayes);
  double fs_best = std::min(delta_bounds_fs(single, {0}, Setting::Bayes).second,
                            delta_bounds_fs(single, {1}, Setting::Bayes).second);
  CHECK(khi <= fs_best + 1e-12);
}

TEST_CASE("sampler classes nest: mrs <= irs <= best fixed set") {
  SourceModel unifc = load_model(data_path("uniform_component.json"));
  for (double Delta : {0.35, 0.45}) {
    double irs = usrdf_irs(unifc, 1, Delta, Setting::NonBayes).rate;
    double mrs = usrdf_mrs(unifc, 1, Delta, Setting::NonBayes).rate;
    double fs = best_fixed_set(unifc, 1, Delta, Setting::NonBayes).rate;
    CHECK(mrs <= irs + 1e-6);
    CHECK(irs <= fs + 1e-6);
    CHECK(mrs < irs - 1e-3);  // the family's strict separation
  }
}
