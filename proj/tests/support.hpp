#pragma once

// Shared fixtures and independent oracles for the test suites. Everything in
// here must stay independent of the solver paths it is used to check: closed
// forms are evaluated directly and searches are plain grid/golden scans.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "usrd/model.hpp"
#include "usrd/prob.hpp"

namespace testsup {

inline std::string data_path(const std::string& name) {
  return std::string(USRD_DATA_DIR) + "/" + name;
}

inline double h(double p) { return usrd::binary_entropy(p); }

// Rate h(p) - h(arg) clamped to the valid region: zero once arg reaches 1/2,
// infeasible (returns infinity) for negative arg.
inline double clamped_rate(double p, double arg) {
  if (arg < 0.0) return std::numeric_limits<double>::infinity();
  if (arg >= 0.5) return 0.0;
  return std::max(0.0, h(p) - h(arg));
}

// 1-D minimization by coarse grid + golden-section refinement.
inline double minimize_scalar(const std::function<double(double)>& f, double lo, double hi,
                              int coarse = 400) {
  double best_x = lo, best_v = f(lo);
  for (int i = 1; i <= coarse; ++i) {
    double x = lo + (hi - lo) * i / coarse;
    double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - (hi - lo) / coarse);
  double b = std::min(hi, best_x + (hi - lo) / coarse);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 120; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return std::min(std::min(f1, f2), best_v);
}

// Virtual-BSC joint: X1 ~ Bern(p), X2 = X1 xor Z, Z ~ Bern(q).
inline usrd::Pmf bsc_joint(double p, double q) {
  return {(1 - p) * (1 - q), (1 - p) * q, p * q, p * (1 - q)};
}

// Independent binary components, P(X1=1)=p, P(X2=1)=q.
inline usrd::Pmf indep_joint(double p, double q) {
  return {(1 - p) * (1 - q), (1 - p) * q, p * (1 - q), p * q};
}

inline std::vector<double> pair_error_distortion() {
  std::vector<double> d(16, 1.0);
  for (int i = 0; i < 4; ++i) d[i * 4 + i] = 0.0;
  return d;
}

inline std::vector<double> additive_hamming() {
  std::vector<double> d;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      d.push_back(((x >> 1) != (y >> 1) ? 1.0 : 0.0) + ((x & 1) != (y & 1) ? 1.0 : 0.0));
  return d;
}

// Two-component binary model from explicit joints.
inline usrd::SourceModel make_model2(const std::vector<usrd::Pmf>& joints,
                                     const std::vector<double>& distortion,
                                     const std::vector<double>& prior) {
  usrd::SourceModel raw;
  raw.m = 2;
  raw.alphabets = {2, 2};
  raw.repro_alphabets = {2, 2};
  raw.recovery_set = {0, 1};
  for (std::size_t i = 0; i < joints.size(); ++i) raw.theta_labels.push_back(std::to_string(i + 1));
  raw.prior = prior;
  raw.family = joints;
  raw.distortion = distortion;
  return usrd::validate_model(std::move(raw));
}

// Independent binary components per (p_tau, q_tau),
// additive Hamming distortion.
inline usrd::SourceModel indep_pair_model(const std::vector<std::pair<double, double>>& pq,
                                        const std::vector<double>& prior) {
  std::vector<usrd::Pmf> joints;
  for (auto [p, q] : pq) joints.push_back(indep_joint(p, q));
  return make_model2(joints, additive_hamming(), prior);
}

}  // namespace testsup
