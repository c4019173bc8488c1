// usrd: universal sampling rate distortion solver front end.
//
// Subcommands: bounds, curve, simulate, compare. Exit codes: 0 ok,
// 2 model error, 3 infeasible grid, 4 simulation precondition,
// 5 property violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "usrd/errors.hpp"
#include "usrd/fixed.hpp"
#include "usrd/irs.hpp"
#include "usrd/model.hpp"
#include "usrd/mrs.hpp"
#include "usrd/report.hpp"
#include "usrd/sim.hpp"

namespace {

using namespace usrd;

struct Cli {
  std::string model_path;
  std::string sampler = "irs";
  std::string setting = "bayes";
  int k = 1;
  std::string delta_spec = "auto";
  std::string out_path;
  std::uint64_t seed = 0;
  int trials = 2000;
  std::string format = "csv";
  std::string tau;
  std::vector<long long> n_list;
  double tol_feas = 1e-7;
  double tol_gap = 1e-6;
  double ordering_slack = 1e-6;
  int mrs_grid_points = 33;
  long long enum_cap = 1 << 20;
};

SamplerSpec parse_sampler(const std::string& text, int k, int m) {
  SamplerSpec spec;
  spec.k = k;
  if (text == "irs") {
    spec.kind = SamplerSpec::Kind::Irs;
  } else if (text == "mrs") {
    spec.kind = SamplerSpec::Kind::Mrs;
  } else if (text.rfind("fs:", 0) == 0) {
    spec.kind = SamplerSpec::Kind::FixedSet;
    std::stringstream ss(text.substr(3));
    std::string item;
    while (std::getline(ss, item, ',')) {
      int comp = std::stoi(item);
      if (comp < 1 || comp > m) fail(Errc::BadConfig, "--sampler fs: component out of range");
      spec.A.push_back(comp - 1);
    }
    if (spec.A.empty()) fail(Errc::BadConfig, "--sampler fs: empty component set");
    std::sort(spec.A.begin(), spec.A.end());
    spec.A.erase(std::unique(spec.A.begin(), spec.A.end()), spec.A.end());
    spec.k = static_cast<int>(spec.A.size());
  } else {
    fail(Errc::BadConfig, "--sampler must be fs:<comma-set>, irs, or mrs");
  }
  return spec;
}

Setting parse_setting(const std::string& text) {
  if (text == "bayes") return Setting::Bayes;
  if (text == "nonbayes") return Setting::NonBayes;
  fail(Errc::BadConfig, "--setting must be bayes or nonbayes");
}

// "min:max:count", explicit comma list, or "auto" (17 points over the
// computed feasible range).
std::vector<double> parse_grid(const std::string& spec, double dmin, double dmax) {
  std::vector<double> grid;
  if (spec == "auto") {
    const int count = 17;
    for (int i = 0; i < count; ++i) grid.push_back(dmin + (dmax - dmin) * i / (count - 1));
    return grid;
  }
  if (spec.find(':') != std::string::npos) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1)
      fail(Errc::BadConfig, "--delta expects min:max:count");
    for (int i = 0; i < count; ++i)
      grid.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    return grid;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
  if (grid.empty()) fail(Errc::BadConfig, "--delta list is empty");
  return grid;
}

void emit(const std::string& out_path, const std::string& payload) {
  if (out_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) fail(Errc::BadConfig, "cannot write output file: " + out_path);
  out << payload;
}

SweepOptions sweep_options(const Cli& cli) {
  SweepOptions opts;
  opts.tol.feas = cli.tol_feas;
  opts.tol.gap = cli.tol_gap;
  opts.mrs.grid_points = cli.mrs_grid_points;
  opts.mrs.enum_cap = cli.enum_cap;
  return opts;
}

int cmd_bounds(const Cli& cli) {
  SourceModel model = load_model(cli.model_path);
  SweepOptions opts = sweep_options(cli);
  std::ostringstream os;
  os << "sampler,setting,delta_min,delta_max\n";
  char buf[160];
  for (Setting setting : {Setting::Bayes, Setting::NonBayes}) {
    for (const auto& A : k_subsets(model.m, cli.k)) {
      auto [lo, hi] = delta_bounds_fs(model, A, setting);
      std::snprintf(buf, sizeof(buf), "fs:%s,%s,%.12g,%.12g\n", subset_name(A).c_str(),
                    setting_name(setting), lo, hi);
      os << buf;
    }
    auto [ilo, ihi] = delta_bounds_irs(model, cli.k, setting);
    std::snprintf(buf, sizeof(buf), "irs,%s,%.12g,%.12g\n", setting_name(setting), ilo, ihi);
    os << buf;
    auto [mlo, mhi] = delta_bounds_mrs(model, cli.k, setting, opts.mrs);
    std::snprintf(buf, sizeof(buf), "mrs,%s,%.12g,%.12g\n", setting_name(setting), mlo, mhi);
    os << buf;
  }
  emit(cli.out_path, os.str());
  return 0;
}

int cmd_curve(const Cli& cli) {
  SourceModel model = load_model(cli.model_path);
  Setting setting = parse_setting(cli.setting);
  SamplerSpec spec = parse_sampler(cli.sampler, cli.k, model.m);
  SweepOptions opts = sweep_options(cli);
  double dmin, dmax;
  switch (spec.kind) {
    case SamplerSpec::Kind::FixedSet:
      std::tie(dmin, dmax) = delta_bounds_fs(model, spec.A, setting);
      break;
    case SamplerSpec::Kind::Irs: std::tie(dmin, dmax) = delta_bounds_irs(model, spec.k, setting); break;
    case SamplerSpec::Kind::Mrs:
      std::tie(dmin, dmax) = delta_bounds_mrs(model, spec.k, setting, opts.mrs);
      break;
  }
  std::vector<double> grid = parse_grid(cli.delta_spec, dmin, dmax);
  RDCurve curve = sweep(model, spec, setting, grid, opts);
  // Points above Delta_max still answer (rate 0); only a grid entirely below
  // Delta_min is infeasible.
  bool any_solved = false;
  for (const auto& p : curve.points) any_solved = any_solved || p.status != "below_min";
  if (!any_solved) {
    std::cerr << "error: the whole grid lies below Delta_min = " << dmin << "\n";
    return 3;
  }
  emit(cli.out_path, cli.format == "json" ? curve_to_json(curve, spec.name(), cli.setting)
                                          : curve_to_csv(curve, spec.name(), cli.setting));
  return 0;
}

int cmd_simulate(const Cli& cli) {
  SourceModel model = load_model(cli.model_path);
  if (cli.tau.empty()) fail(Errc::BadConfig, "--tau is required for simulate");
  std::vector<long long> lengths = cli.n_list.empty() ? std::vector<long long>{20, 200, 2000}
                                                      : cli.n_list;
  SimReport report;
  if (cli.sampler.rfind("fs:", 0) == 0) {
    SamplerSpec spec = parse_sampler(cli.sampler, cli.k, model.m);
    report = simulate_fs_ml(model, spec.A, cli.tau, lengths, cli.trials, cli.seed);
  } else if (cli.sampler == "irs") {
    report = simulate_irs_phase1(model, cli.k, cli.tau, lengths, cli.trials, cli.seed);
  } else if (cli.sampler == "mrs") {
    report = simulate_mrs_signaling(model, cli.k, cli.tau, lengths, cli.trials, cli.seed);
  } else {
    fail(Errc::BadConfig, "--sampler must be fs:<set>, irs, or mrs");
  }
  emit(cli.out_path, sim_report_to_json(report) + "\n");
  return 0;
}

int cmd_compare(const Cli& cli) {
  SourceModel model = load_model(cli.model_path);
  SweepOptions opts = sweep_options(cli);
  double lo = 0.0, hi = 0.0;
  {
    auto [mlo, mhi] = delta_bounds_mrs(model, cli.k, Setting::NonBayes, opts.mrs);
    auto [ilo, ihi] = delta_bounds_irs(model, cli.k, Setting::NonBayes);
    lo = std::min(mlo, ilo);
    hi = std::max(mhi, ihi);
  }
  std::vector<double> grid = parse_grid(cli.delta_spec, lo, hi);
  ComparisonReport report = compare_samplers(model, cli.k, {Setting::Bayes, Setting::NonBayes},
                                             grid, opts, cli.ordering_slack);
  emit(cli.out_path,
       cli.format == "json" ? comparison_to_json(report) : comparison_to_csv(report));
  if (!report.violations.empty()) {
    std::cerr << "error: " << report.violations.size() << " ordering violations, worst "
              << report.violations.front().kind << "\n";
    return 5;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"universal sampling rate distortion solver"};
  app.require_subcommand(1);
  Cli cli;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", cli.model_path, "model JSON file")->required();
    sub->add_option("--sampler", cli.sampler, "fs:<comma-set> | irs | mrs");
    sub->add_option("--setting", cli.setting, "bayes | nonbayes");
    sub->add_option("--k", cli.k, "samples per time instant");
    sub->add_option("--delta", cli.delta_spec, "min:max:count, comma list, or auto");
    sub->add_option("--out", cli.out_path, "output path (stdout if omitted)");
    sub->add_option("--seed", cli.seed, "RNG seed");
    sub->add_option("--trials", cli.trials, "Monte Carlo trials");
    sub->add_option("--format", cli.format, "csv | json");
    sub->add_option("--tau", cli.tau, "true theta label (simulate)");
    sub->add_option("--n", cli.n_list, "sequence lengths (simulate)");
    sub->add_option("--tol-feas", cli.tol_feas, "distortion feasibility tolerance");
    sub->add_option("--tol-gap", cli.tol_gap, "rate tolerance");
    sub->add_option("--ordering-slack", cli.ordering_slack, "compare ordering slack");
    sub->add_option("--mrs-grid-points", cli.mrs_grid_points, "MRS tabulation grid size");
    sub->add_option("--enum-cap", cli.enum_cap, "deterministic-sampler enumeration cap");
  };
  CLI::App* bounds = app.add_subcommand("bounds", "print Delta_min/Delta_max per sampler");
  CLI::App* curve = app.add_subcommand("curve", "sweep a rate-distortion curve");
  CLI::App* simulate = app.add_subcommand("simulate", "estimation-phase Monte Carlo");
  CLI::App* compare = app.add_subcommand("compare", "cross-sampler comparison report");
  for (CLI::App* sub : {bounds, curve, simulate, compare}) add_common(sub);

  CLI11_PARSE(app, argc, argv);
  try {
    if (bounds->parsed()) return cmd_bounds(cli);
    if (curve->parsed()) return cmd_curve(cli);
    if (simulate->parsed()) return cmd_simulate(cli);
    if (compare->parsed()) return cmd_compare(cli);
  } catch (const usrd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case usrd::Errc::SignalingImpossible: return 4;
      case usrd::Errc::DeltaOutOfRange:
      case usrd::Errc::InfeasibleDelta:
      case usrd::Errc::Infeasible: return 3;
      case usrd::Errc::BadConfig: return 64;
      default: return 2;  // model validation failures
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
