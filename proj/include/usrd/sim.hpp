#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "usrd/model.hpp"

namespace usrd {

// Empirical cell-estimation error frequencies, one entry per requested
// sequence length. Reproducible bit-for-bit from (seed, trial index).
struct SimReport {
  std::string kind;
  std::string descriptor;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string tau_true;
  std::vector<long long> lengths;
  std::vector<double> errors;  // exact trial frequencies, aligned with lengths
  std::map<std::string, double> extra;
};

std::string sim_report_to_json(const SimReport& report);

// n i.i.d. joint-symbol draws from P_{X_M | tau}; deterministic given seed.
std::vector<int> sample_dmms(const SourceModel& model, const std::string& tau, long long n,
                             std::uint64_t seed);

// ML identification of the Theta1(A) ambiguity cell from X_A^n.
SimReport simulate_fs_ml(const SourceModel& model, const std::vector<int>& A,
                         const std::string& tau_true, const std::vector<long long>& n_list,
                         int trials, std::uint64_t seed);

// Same machinery with caller-supplied cells (negative controls, cross-checks).
SimReport simulate_fs_ml_with_cells(const SourceModel& model, const std::vector<int>& A,
                                    const std::vector<std::vector<int>>& cells,
                                    const std::string& tau_true,
                                    const std::vector<long long>& n_list, int trials,
                                    std::uint64_t seed);

// Phase-1 of the k-IRS scheme: every A_i in A_k sampled for N instants, ML
// over Theta2 cells from the product of per-subset likelihoods.
SimReport simulate_irs_phase1(const SourceModel& model, int k, const std::string& tau_true,
                              const std::vector<long long>& N_list, int trials,
                              std::uint64_t seed);

// MRS signaling phase: source realizations conveyed through the sampling
// sequence alone (one-to-one when |A_k| >= |X_M|, chunked otherwise), then ML
// over Theta from S^mu only.
SimReport simulate_mrs_signaling(const SourceModel& model, int k, const std::string& tau_true,
                                 const std::vector<long long>& N_list, int trials,
                                 std::uint64_t seed);

// ML over Theta from fully observed X_M^n; shares the draw streams of the
// other simulators, so one-to-one signaling must reproduce it exactly.
SimReport simulate_full_ml(const SourceModel& model, const std::string& tau_true,
                           const std::vector<long long>& n_list, int trials, std::uint64_t seed);

}  // namespace usrd
