#pragma once

#include <memory>
#include <vector>

#include "usrd/fixed.hpp"
#include "usrd/model.hpp"
#include "usrd/rd.hpp"

namespace usrd {

// Deterministic memoryless sampler: one k-subset (index into the
// lexicographic A_k order) per joint source symbol.
struct DeterministicSampler {
  std::vector<int> map;  // length |X_M|
};

struct SamplerEnumeration {
  std::vector<DeterministicSampler> samplers;  // deduplicated, lexicographic reps
  long long total_maps = 0;                    // count before deduplication
};

struct MrsOptions {
  int grid_points = 33;           // per-(sampler, tau) distortion grid
  long long enum_cap = 1 << 20;   // cap on |A_k|^{|X_M|}
};

// All total maps X_M -> A_k, deduplicated up to informational equivalence:
// maps inducing the same (S, X_S)-partition of X_M are interchangeable and
// only the lexicographically smallest representative is kept.
SamplerEnumeration enumerate_pure_samplers(const SourceModel& model, int k,
                                           long long enum_cap = 1 << 20);

// Curve of the conditional-mutual-information minimum for one deterministic
// sampler and one true tau; conditioning on S = w(X_M) pools joint symbols,
// which carries information about the unsampled components.
std::shared_ptr<RdCurveSolver> mrs_pure_curve(const SourceModel& model, int k,
                                              const DeterministicSampler& w, int tau,
                                              const Tolerances& tol = {});

RDPoint rho_mrs_pure(const SourceModel& model, int k, const DeterministicSampler& w, int tau,
                     double delta, const Tolerances& tol = {});

struct MrsSlot {
  double p_u = 0.0;
  DeterministicSampler sampler;
  std::vector<double> rate_per_tau;
  std::vector<double> dist_per_tau;
};

struct MrsPolicy {
  std::vector<MrsSlot> slots;  // |slots| <= 2|Theta| + 1
};

struct UsrdfMrsResult {
  double rate = 0.0;
  MrsPolicy policy;
};

UsrdfMrsResult usrdf_mrs(const SourceModel& model, int k, double Delta, Setting setting,
                         const Tolerances& tol = {}, const MrsOptions& opts = {});

std::pair<double, double> delta_bounds_mrs(const SourceModel& model, int k, Setting setting,
                                           const MrsOptions& opts = {});

}  // namespace usrd
