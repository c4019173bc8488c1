#include "usrd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "usrd/errors.hpp"

namespace usrd {

double SourceModel::d_max() const {
  double v = 0.0;
  for (double e : distortion) v = std::max(v, e);
  return v;
}

int SourceModel::xb_of_joint(int joint) const { return project_joint(joint, recovery_set); }

int SourceModel::project_joint(int joint, const std::vector<int>& A) const {
  std::vector<int> digits(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) digits[i] = joint_index.digit(joint, A[i]);
  return sub_indexer(A).compose(digits);
}

JointIndexer SourceModel::sub_indexer(const std::vector<int>& A) const {
  std::vector<int> sizes(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) sizes[i] = alphabets[A[i]];
  return JointIndexer(sizes);
}

Pmf SourceModel::marginal(const std::vector<double>& theta_weights, const std::vector<int>& A) const {
  double wsum = 0.0;
  for (double w : theta_weights) wsum += w;
  if (wsum <= 0.0) fail(Errc::PmfNotNormalized, "marginal: zero total theta weight");
  Pmf out(sub_indexer(A).total(), 0.0);
  for (int t = 0; t < num_theta(); ++t) {
    double w = theta_weights[t] / wsum;
    if (w == 0.0) continue;
    const Pmf& joint = family[t];
    for (int x = 0; x < joint_size(); ++x) out[project_joint(x, A)] += w * joint[x];
  }
  return out;
}

std::vector<double> SourceModel::cell_weights(const std::vector<int>& cell) const {
  std::vector<double> w(num_theta(), 0.0);
  double total = 0.0;
  for (int tau : cell) {
    w[tau] = prior[tau];
    total += prior[tau];
  }
  if (total <= 0.0) fail(Errc::PmfNotNormalized, "cell has zero prior mass");
  for (double& v : w) v /= total;
  return w;
}

int SourceModel::tau_index(const std::string& label) const {
  for (int t = 0; t < num_theta(); ++t)
    if (theta_labels[t] == label) return t;
  fail(Errc::UnknownTau, "no such theta label: " + label);
}

int AmbiguityPartition::cell_of(int tau) const {
  for (int c = 0; c < num_cells(); ++c)
    for (int t : cells[c])
      if (t == tau) return c;
  fail(Errc::UnknownTau, "tau index not in partition");
}

bool AmbiguityPartition::refines(const AmbiguityPartition& coarser) const {
  for (const auto& cell : cells) {
    int host = coarser.cell_of(cell.front());
    for (int tau : cell) {
      if (coarser.cell_of(tau) != host) return false;
    }
  }
  return true;
}

SourceModel validate_model(SourceModel raw) {
  if (raw.m <= 0) fail(Errc::InconsistentAlphabet, "field m must be positive");
  if (static_cast<int>(raw.alphabets.size()) != raw.m)
    fail(Errc::InconsistentAlphabet, "field alphabets: expected m entries");
  if (static_cast<int>(raw.repro_alphabets.size()) != raw.m)
    fail(Errc::InconsistentAlphabet, "field reproduction_alphabets: expected m entries");
  for (int s : raw.alphabets)
    if (s < 1) fail(Errc::InconsistentAlphabet, "field alphabets: sizes must be >= 1");
  if (raw.recovery_set.empty()) fail(Errc::EmptyRecoverySet, "field recovery_set is empty");
  std::sort(raw.recovery_set.begin(), raw.recovery_set.end());
  raw.recovery_set.erase(std::unique(raw.recovery_set.begin(), raw.recovery_set.end()),
                         raw.recovery_set.end());
  for (int i : raw.recovery_set)
    if (i < 0 || i >= raw.m)
      fail(Errc::InconsistentAlphabet, "field recovery_set: component out of range");
  for (int i : raw.recovery_set)
    if (raw.repro_alphabets[i] < 1)
      fail(Errc::InconsistentAlphabet, "field reproduction_alphabets: sizes must be >= 1 on B");

  raw.joint_index = JointIndexer(raw.alphabets);
  {
    std::vector<int> xb_sizes, yb_sizes;
    for (int i : raw.recovery_set) {
      xb_sizes.push_back(raw.alphabets[i]);
      yb_sizes.push_back(raw.repro_alphabets[i]);
    }
    raw.xb_index = JointIndexer(xb_sizes);
    raw.yb_index = JointIndexer(yb_sizes);
  }

  if (raw.theta_labels.empty()) fail(Errc::InconsistentAlphabet, "field theta_labels is empty");
  if (raw.prior.size() != raw.theta_labels.size())
    fail(Errc::InconsistentAlphabet, "field prior: expected one entry per theta label");
  if (raw.family.size() != raw.theta_labels.size())
    fail(Errc::InconsistentAlphabet, "field family: expected one pmf per theta label");

  double prior_sum = sum(raw.prior);
  if (std::abs(prior_sum - 1.0) > 1e-6)
    fail(Errc::PmfNotNormalized, "field prior: sums to " + std::to_string(prior_sum));
  for (double v : raw.prior)
    if (v <= 0.0) fail(Errc::ZeroMassSymbol, "field prior: must have full support");
  for (double& v : raw.prior) v /= prior_sum;

  for (std::size_t t = 0; t < raw.family.size(); ++t) {
    Pmf& pmf = raw.family[t];
    if (static_cast<int>(pmf.size()) != raw.joint_size())
      fail(Errc::InconsistentAlphabet,
           "field family[" + raw.theta_labels[t] + "]: expected " +
               std::to_string(raw.joint_size()) + " entries");
    double s = sum(pmf);
    if (std::abs(s - 1.0) > 1e-6)
      fail(Errc::PmfNotNormalized,
           "field family[" + raw.theta_labels[t] + "]: sums to " + std::to_string(s));
    for (double v : pmf)
      if (v <= 0.0)
        fail(Errc::ZeroMassSymbol,
             "field family[" + raw.theta_labels[t] + "]: full support required");
    for (double& v : pmf) v /= s;
  }

  if (static_cast<int>(raw.distortion.size()) != raw.xb_size() * raw.yb_size())
    fail(Errc::InconsistentAlphabet,
         "field distortion: expected " + std::to_string(raw.xb_size() * raw.yb_size()) +
             " entries");
  for (double v : raw.distortion) {
    if (!std::isfinite(v)) fail(Errc::NegativeDistortion, "field distortion: non-finite entry");
    if (v < 0.0) fail(Errc::NegativeDistortion, "field distortion: negative entry");
  }
  return raw;
}

SourceModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::BadConfig, "cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(Errc::BadConfig, std::string("model file is not valid JSON: ") + e.what());
  }
  SourceModel raw;
  try {
    raw.m = j.at("m").get<int>();
    raw.alphabets = j.at("alphabets").get<std::vector<int>>();
    raw.repro_alphabets = j.at("reproduction_alphabets").get<std::vector<int>>();
    for (int i : j.at("recovery_set").get<std::vector<int>>()) raw.recovery_set.push_back(i - 1);
    raw.theta_labels = j.at("theta_labels").get<std::vector<std::string>>();
    raw.prior = j.at("prior").get<std::vector<double>>();
    const auto& fam = j.at("family");
    for (const auto& label : raw.theta_labels) {
      if (!fam.contains(label))
        fail(Errc::InconsistentAlphabet, "field family: missing pmf for theta label " + label);
      raw.family.push_back(fam.at(label).get<std::vector<double>>());
    }
    raw.distortion = j.at("distortion").get<std::vector<double>>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(Errc::BadConfig, std::string("model file field error: ") + e.what());
  }
  return validate_model(std::move(raw));
}

std::string model_to_json(const SourceModel& model) {
  nlohmann::json j;
  j["m"] = model.m;
  j["alphabets"] = model.alphabets;
  j["reproduction_alphabets"] = model.repro_alphabets;
  std::vector<int> rec;
  for (int i : model.recovery_set) rec.push_back(i + 1);
  j["recovery_set"] = rec;
  j["theta_labels"] = model.theta_labels;
  j["prior"] = model.prior;
  nlohmann::json fam = nlohmann::json::object();
  for (int t = 0; t < model.num_theta(); ++t) fam[model.theta_labels[t]] = model.family[t];
  j["family"] = fam;
  j["distortion"] = model.distortion;
  return j.dump(2);
}

namespace {

bool tables_close(const Pmf& a, const Pmf& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

AmbiguityPartition group_by_signature(const SourceModel& model,
                                      const std::vector<Pmf>& signature,
                                      AmbiguityPartition::Kind kind, double tol) {
  AmbiguityPartition part;
  part.kind = kind;
  for (int tau = 0; tau < model.num_theta(); ++tau) {
    bool placed = false;
    for (auto& cell : part.cells) {
      if (tables_close(signature[cell.front()], signature[tau], tol)) {
        cell.push_back(tau);
        placed = true;
        break;
      }
    }
    if (!placed) part.cells.push_back({tau});
  }
  // Enumerating taus in order already canonicalizes cells by smallest member.
  part.induced_prior.resize(part.cells.size());
  for (std::size_t c = 0; c < part.cells.size(); ++c) {
    double mass = 0.0;
    for (int tau : part.cells[c]) mass += model.prior[tau];
    part.induced_prior[c] = mass;
  }
  return part;
}

}  // namespace

AmbiguityPartition theta1_partition(const SourceModel& model, const std::vector<int>& A,
                                    double tol_pmf) {
  if (A.empty()) fail(Errc::EmptyRecoverySet, "theta1_partition: sampling set is empty");
  std::vector<Pmf> sig(model.num_theta());
  for (int tau = 0; tau < model.num_theta(); ++tau) {
    std::vector<double> w(model.num_theta(), 0.0);
    w[tau] = 1.0;
    sig[tau] = model.marginal(w, A);
  }
  return group_by_signature(model, sig, AmbiguityPartition::Kind::Theta1, tol_pmf);
}

AmbiguityPartition theta2_partition(const SourceModel& model, int k, double tol_pmf) {
  if (k < 1 || k > model.m) fail(Errc::BadConfig, "theta2_partition: k out of range");
  auto subsets = k_subsets(model.m, k);
  std::vector<Pmf> sig(model.num_theta());
  for (int tau = 0; tau < model.num_theta(); ++tau) {
    std::vector<double> w(model.num_theta(), 0.0);
    w[tau] = 1.0;
    Pmf concat;
    for (const auto& A : subsets) {
      Pmf mar = model.marginal(w, A);
      concat.insert(concat.end(), mar.begin(), mar.end());
    }
    sig[tau] = std::move(concat);
  }
  return group_by_signature(model, sig, AmbiguityPartition::Kind::Theta2, tol_pmf);
}

DistortionTable modified_distortion(const SourceModel& model, const std::vector<int>& cell,
                                    const std::vector<int>& A) {
  auto weights = model.cell_weights(cell);
  JointIndexer a_index = model.sub_indexer(A);
  DistortionTable table;
  table.conditioning = "X_" + subset_name(A);
  table.rows.assign(a_index.total(), std::vector<double>(model.yb_size(), 0.0));

  Pmf xa_mass(a_index.total(), 0.0);
  for (int tau = 0; tau < model.num_theta(); ++tau) {
    double w = weights[tau];
    if (w == 0.0) continue;
    const Pmf& joint = model.family[tau];
    for (int x = 0; x < model.joint_size(); ++x) {
      int xa = model.project_joint(x, A);
      int xb = model.xb_of_joint(x);
      double mass = w * joint[x];
      xa_mass[xa] += mass;
      for (int y = 0; y < model.yb_size(); ++y) table.rows[xa][y] += mass * model.d(xb, y);
    }
  }
  for (int xa = 0; xa < a_index.total(); ++xa) {
    if (xa_mass[xa] <= 0.0) continue;  // unreachable under full support
    for (double& v : table.rows[xa]) v /= xa_mass[xa];
  }
  return table;
}

std::vector<std::vector<int>> k_subsets(int m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  // lexicographic by construction
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i <= m - (k - static_cast<int>(cur.size())); ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

std::string subset_name(const std::vector<int>& A) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (i) os << ",";
    os << (A[i] + 1);
  }
  os << "}";
  return os.str();
}

}  // namespace usrd
