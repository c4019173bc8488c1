#include "usrd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"
#include "usrd/errors.hpp"
#include "usrd/parallel.hpp"

namespace usrd {

namespace {

// Per-trial stream: trial index hashed into the master seed, so parallel and
// serial execution agree exactly.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  return std::mt19937_64(mix64(seed ^ mix64(trial + 0x51ed2700)));
}

double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct CdfSampler {
  std::vector<double> cdf;
  explicit CdfSampler(const Pmf& pmf) {
    cdf.resize(pmf.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      cdf[i] = acc;
    }
    cdf.back() = 1.0;
  }
  int draw(std::mt19937_64& rng) const {
    double u = canonical(rng);
    return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  }
};

std::vector<long long> checkpoints(const std::vector<long long>& lengths) {
  std::vector<long long> cps = lengths;
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  if (cps.empty() || cps.front() < 1) fail(Errc::BadConfig, "sequence lengths must be >= 1");
  return cps;
}

// Reorders per-checkpoint error counts back into the caller's length order.
SimReport assemble(std::string kind, std::string descriptor, std::uint64_t seed, int trials,
                   std::string tau_true, const std::vector<long long>& lengths,
                   const std::vector<long long>& cps, const std::vector<long long>& fails) {
  SimReport rep;
  rep.kind = std::move(kind);
  rep.descriptor = std::move(descriptor);
  rep.seed = seed;
  rep.trials = trials;
  rep.tau_true = std::move(tau_true);
  rep.lengths = lengths;
  for (long long n : lengths) {
    std::size_t at = std::lower_bound(cps.begin(), cps.end(), n) - cps.begin();
    rep.errors.push_back(static_cast<double>(fails[at]) / trials);
  }
  return rep;
}

int argmax_smallest_tie(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

std::string sim_report_to_json(const SimReport& report) {
  nlohmann::json j;
  j["kind"] = report.kind;
  j["descriptor"] = report.descriptor;
  j["seed"] = report.seed;
  j["trials"] = report.trials;
  j["tau_true"] = report.tau_true;
  j["lengths"] = report.lengths;
  j["errors"] = report.errors;
  j["extra"] = report.extra;
  return j.dump(2);
}

std::vector<int> sample_dmms(const SourceModel& model, const std::string& tau, long long n,
                             std::uint64_t seed) {
  if (n < 1) fail(Errc::BadConfig, "sample_dmms: n must be >= 1");
  int t = model.tau_index(tau);
  CdfSampler sampler(model.family[t]);
  std::mt19937_64 rng = trial_rng(seed, 0);
  std::vector<int> out(n);
  for (long long i = 0; i < n; ++i) out[i] = sampler.draw(rng);
  return out;
}

namespace {

// Common ML-identification loop: draw joints from tau_true, project onto the
// observation set, accumulate per-hypothesis log-likelihoods of the projected
// symbol, count errors at each checkpoint.
SimReport ml_identification(const SourceModel& model, const std::vector<int>& obs_set,
                            const std::vector<Pmf>& hypothesis_pmfs, int true_hypothesis,
                            const std::string& tau_true, const std::vector<long long>& n_list,
                            int trials, std::uint64_t seed, const std::string& kind,
                            const std::string& descriptor) {
  if (trials < 1) fail(Errc::BadConfig, "trials must be >= 1");
  auto cps = checkpoints(n_list);
  const long long n_max = cps.back();
  const std::size_t nh = hypothesis_pmfs.size();

  std::vector<std::vector<double>> log_tables(nh);
  for (std::size_t h = 0; h < nh; ++h) {
    log_tables[h].resize(hypothesis_pmfs[h].size());
    for (std::size_t s = 0; s < hypothesis_pmfs[h].size(); ++s)
      log_tables[h][s] = std::log(hypothesis_pmfs[h][s]);
  }
  CdfSampler joint_sampler(model.family[model.tau_index(tau_true)]);

  std::vector<std::vector<long long>> fails_per_trial(trials,
                                                      std::vector<long long>(cps.size(), 0));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
    std::mt19937_64 rng = trial_rng(seed, trial);
    std::vector<double> loglik(nh, 0.0);
    std::size_t cp = 0;
    for (long long t = 1; t <= n_max; ++t) {
      int joint = joint_sampler.draw(rng);
      int sym = model.project_joint(joint, obs_set);
      for (std::size_t h = 0; h < nh; ++h) loglik[h] += log_tables[h][sym];
      if (t == cps[cp]) {
        if (argmax_smallest_tie(loglik) != true_hypothesis) fails_per_trial[trial][cp] = 1;
        ++cp;
      }
    }
  });
  std::vector<long long> fails(cps.size(), 0);
  for (int tr = 0; tr < trials; ++tr)
    for (std::size_t c = 0; c < cps.size(); ++c) fails[c] += fails_per_trial[tr][c];
  return assemble(kind, descriptor, seed, trials, tau_true, n_list, cps, fails);
}

}  // namespace

SimReport simulate_fs_ml_with_cells(const SourceModel& model, const std::vector<int>& A,
                                    const std::vector<std::vector<int>>& cells,
                                    const std::string& tau_true,
                                    const std::vector<long long>& n_list, int trials,
                                    std::uint64_t seed) {
  if (A.empty()) fail(Errc::EmptyRecoverySet, "simulate_fs_ml: sampling set is empty");
  int tau = model.tau_index(tau_true);
  int true_cell = -1;
  std::vector<Pmf> cell_pmfs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cell_pmfs.push_back(model.marginal(model.cell_weights(cells[c]), A));
    for (int t : cells[c])
      if (t == tau) true_cell = static_cast<int>(c);
  }
  if (true_cell < 0) fail(Errc::UnknownTau, "tau_true is not in any supplied cell");
  return ml_identification(model, A, cell_pmfs, true_cell, tau_true, n_list, trials, seed,
                           "fs-ml", "A=" + subset_name(A));
}

SimReport simulate_fs_ml(const SourceModel& model, const std::vector<int>& A,
                         const std::string& tau_true, const std::vector<long long>& n_list,
                         int trials, std::uint64_t seed) {
  AmbiguityPartition part = theta1_partition(model, A);
  return simulate_fs_ml_with_cells(model, A, part.cells, tau_true, n_list, trials, seed);
}

SimReport simulate_full_ml(const SourceModel& model, const std::string& tau_true,
                           const std::vector<long long>& n_list, int trials, std::uint64_t seed) {
  std::vector<int> all(model.m);
  for (int i = 0; i < model.m; ++i) all[i] = i;
  std::vector<std::vector<int>> cells;
  for (int t = 0; t < model.num_theta(); ++t) cells.push_back({t});
  SimReport rep =
      simulate_fs_ml_with_cells(model, all, cells, tau_true, n_list, trials, seed);
  rep.kind = "full-ml";
  rep.descriptor = "full observation";
  return rep;
}

SimReport simulate_irs_phase1(const SourceModel& model, int k, const std::string& tau_true,
                              const std::vector<long long>& N_list, int trials,
                              std::uint64_t seed) {
  if (trials < 1) fail(Errc::BadConfig, "trials must be >= 1");
  auto cps = checkpoints(N_list);
  const long long n_max = cps.back();
  auto subsets = k_subsets(model.m, k);
  AmbiguityPartition part = theta2_partition(model, k);
  int tau = model.tau_index(tau_true);
  int true_cell = part.cell_of(tau);

  // log P_{X_{A_i} | cell}(x_{A_i}) tables, one per (subset, cell)
  std::vector<std::vector<std::vector<double>>> log_tab(subsets.size());
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    log_tab[a].resize(part.num_cells());
    for (int c = 0; c < part.num_cells(); ++c) {
      Pmf pmf = model.marginal(model.cell_weights(part.cells[c]), subsets[a]);
      log_tab[a][c].resize(pmf.size());
      for (std::size_t s = 0; s < pmf.size(); ++s) log_tab[a][c][s] = std::log(pmf[s]);
    }
  }
  CdfSampler joint_sampler(model.family[tau]);

  std::vector<std::vector<long long>> fails_per_trial(trials,
                                                      std::vector<long long>(cps.size(), 0));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
    std::mt19937_64 rng = trial_rng(seed, trial);
    std::vector<double> loglik(part.num_cells(), 0.0);
    std::size_t cp = 0;
    for (long long t = 1; t <= n_max; ++t) {
      for (std::size_t a = 0; a < subsets.size(); ++a) {
        int joint = joint_sampler.draw(rng);
        int sym = model.project_joint(joint, subsets[a]);
        for (int c = 0; c < part.num_cells(); ++c) loglik[c] += log_tab[a][c][sym];
      }
      if (t == cps[cp]) {
        if (argmax_smallest_tie(loglik) != true_cell) fails_per_trial[trial][cp] = 1;
        ++cp;
      }
    }
  });
  std::vector<long long> fails(cps.size(), 0);
  for (int tr = 0; tr < trials; ++tr)
    for (std::size_t c = 0; c < cps.size(); ++c) fails[c] += fails_per_trial[tr][c];
  SimReport rep = assemble("irs-phase1", "k=" + std::to_string(k), seed, trials, tau_true,
                           N_list, cps, fails);
  rep.extra["subsets"] = static_cast<double>(subsets.size());
  return rep;
}

SimReport simulate_mrs_signaling(const SourceModel& model, int k, const std::string& tau_true,
                                 const std::vector<long long>& N_list, int trials,
                                 std::uint64_t seed) {
  if (trials < 1) fail(Errc::BadConfig, "trials must be >= 1");
  auto cps = checkpoints(N_list);
  const long long n_max = cps.back();
  auto subsets = k_subsets(model.m, k);
  const int na = static_cast<int>(subsets.size());
  const int nx = model.joint_size();
  const int nt = model.num_theta();
  int tau = model.tau_index(tau_true);

  if (na < 2 && nx > 1)
    fail(Errc::SignalingImpossible,
         "|A_k| = 1 cannot signal a source alphabet of size " + std::to_string(nx));

  const bool one_to_one = na >= nx;
  const int chunk_width = one_to_one ? nx : na - 1;
  const int chunks = one_to_one ? 1 : (nx + chunk_width - 1) / chunk_width;

  std::vector<std::vector<double>> log_p(nt, std::vector<double>(nx));
  for (int t = 0; t < nt; ++t)
    for (int x = 0; x < nx; ++x) log_p[t][x] = std::log(model.family[t][x]);
  // log P(X not in chunk | tau), per chunk
  std::vector<std::vector<double>> log_out(nt, std::vector<double>(chunks, 0.0));
  if (!one_to_one) {
    for (int t = 0; t < nt; ++t)
      for (int l = 0; l < chunks; ++l) {
        double in = 0.0;
        for (int x = l * chunk_width; x < std::min(nx, (l + 1) * chunk_width); ++x)
          in += model.family[t][x];
        log_out[t][l] = std::log(std::max(1e-300, 1.0 - in));
      }
  }
  CdfSampler joint_sampler(model.family[tau]);

  std::vector<std::vector<long long>> fails_per_trial(trials,
                                                      std::vector<long long>(cps.size(), 0));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t trial) {
    std::mt19937_64 rng = trial_rng(seed, trial);
    std::vector<double> loglik(nt, 0.0);
    std::size_t cp = 0;
    for (long long t = 1; t <= n_max; ++t) {
      if (one_to_one) {
        // s_t = A_{x_t}; the decoder inverts it and sees x_t exactly
        int joint = joint_sampler.draw(rng);
        int recovered = joint;
        for (int h = 0; h < nt; ++h) loglik[h] += log_p[h][recovered];
      } else {
        // one instant of every chunk's time-set; dummy set = non-occurrence
        for (int l = 0; l < chunks; ++l) {
          int joint = joint_sampler.draw(rng);
          bool in_chunk = joint >= l * chunk_width && joint < (l + 1) * chunk_width;
          for (int h = 0; h < nt; ++h)
            loglik[h] += in_chunk ? log_p[h][joint] : log_out[h][l];
        }
      }
      if (t == cps[cp]) {
        if (argmax_smallest_tie(loglik) != tau) fails_per_trial[trial][cp] = 1;
        ++cp;
      }
    }
  });
  std::vector<long long> fails(cps.size(), 0);
  for (int tr = 0; tr < trials; ++tr)
    for (std::size_t c = 0; c < cps.size(); ++c) fails[c] += fails_per_trial[tr][c];
  SimReport rep = assemble("mrs-signaling",
                           one_to_one ? "one-to-one" : "chunked", seed, trials, tau_true,
                           N_list, cps, fails);
  rep.extra["chunks"] = chunks;
  rep.extra["effective_length_factor"] = chunks;
  rep.extra["one_to_one"] = one_to_one ? 1.0 : 0.0;
  return rep;
}

}  // namespace usrd
