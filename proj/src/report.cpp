#include "usrd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"
#include "usrd/errors.hpp"
#include "usrd/parallel.hpp"

namespace usrd {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::pair<double, double> spec_bounds(const SourceModel& model, const SamplerSpec& spec,
                                      Setting setting, const SweepOptions& opts) {
  switch (spec.kind) {
    case SamplerSpec::Kind::FixedSet: return delta_bounds_fs(model, spec.A, setting);
    case SamplerSpec::Kind::Irs: return delta_bounds_irs(model, spec.k, setting);
    case SamplerSpec::Kind::Mrs: return delta_bounds_mrs(model, spec.k, setting, opts.mrs);
  }
  fail(Errc::BadConfig, "unknown sampler kind");
}

double spec_rate(const SourceModel& model, const SamplerSpec& spec, Setting setting, double delta,
                 const SweepOptions& opts) {
  switch (spec.kind) {
    case SamplerSpec::Kind::FixedSet:
      return usrdf_fs(model, spec.A, delta, setting, opts.tol).rate;
    case SamplerSpec::Kind::Irs:
      return usrdf_irs(model, spec.k, delta, setting, opts.tol, opts.irs).rate;
    case SamplerSpec::Kind::Mrs:
      return usrdf_mrs(model, spec.k, delta, setting, opts.tol, opts.mrs).rate;
  }
  fail(Errc::BadConfig, "unknown sampler kind");
}

}  // namespace

std::string SamplerSpec::name() const {
  switch (kind) {
    case Kind::FixedSet: return "fs:" + subset_name(A);
    case Kind::Irs: return "irs";
    case Kind::Mrs: return "mrs";
  }
  return "?";
}

RDCurve sweep(const SourceModel& model, const SamplerSpec& spec, Setting setting,
              const std::vector<double>& grid, const SweepOptions& opts) {
  RDCurve curve;
  curve.problem = spec.name() + "/" + setting_name(setting);
  auto [dmin, dmax] = spec_bounds(model, spec, setting, opts);
  curve.points.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    double delta = grid[i];
    RDCurvePoint pt;
    pt.delta = delta;
    if (delta < dmin - opts.tol.feas) {
      pt.status = "below_min";
      pt.rate = kNan;
    } else if (delta > dmax + opts.tol.feas) {
      pt.status = "above_max";
      pt.rate = 0.0;
    } else {
      pt.status = "ok";
      pt.rate = spec_rate(model, spec, setting, std::min(delta, dmax), opts);
    }
    curve.points[i] = pt;
  });
  return curve;
}

std::vector<CurveViolation> audit_curve(const RDCurve& curve, const Tolerances& tol) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : curve.points)
    if (!std::isnan(p.rate)) pts.emplace_back(p.delta, p.rate);
  std::sort(pts.begin(), pts.end());
  if (pts.size() < 3) fail(Errc::BadConfig, "audit_curve needs at least 3 solved points");

  std::vector<CurveViolation> out;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double increase = pts[i].second - pts[i - 1].second;
    if (increase > tol.gap)
      out.push_back({pts[i].first, "monotonicity", increase});
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    auto [d0, r0] = pts[i - 1];
    auto [d1, r1] = pts[i];
    auto [d2, r2] = pts[i + 1];
    if (d2 - d0 < 1e-15) continue;
    double chord = r0 + (r2 - r0) * (d1 - d0) / (d2 - d0);
    double above = r1 - chord;
    if (above > tol.convex) out.push_back({d1, "convexity", above});
  }
  return out;
}

ComparisonReport compare_samplers(const SourceModel& model, int k,
                                  const std::vector<Setting>& settings,
                                  const std::vector<double>& grid, const SweepOptions& opts,
                                  double ordering_slack) {
  ComparisonReport rep;
  rep.grid = grid;

  auto subsets = k_subsets(model.m, k);
  for (Setting setting : settings) {
    ComparisonColumn fs_col{"best-fs", setting_name(setting), {}, {}};
    ComparisonColumn irs_col{"irs", setting_name(setting), {}, {}};
    ComparisonColumn mrs_col{"mrs", setting_name(setting), {}, {}};

    auto [irs_min, irs_max] = delta_bounds_irs(model, k, setting);
    auto [mrs_min, mrs_max] = delta_bounds_mrs(model, k, setting, opts.mrs);
    double fs_min = std::numeric_limits<double>::infinity(), fs_max = 0.0;
    for (const auto& A : subsets) {
      auto [lo, hi] = delta_bounds_fs(model, A, setting);
      fs_min = std::min(fs_min, lo);
      fs_max = std::max(fs_max, hi);
    }

    auto eval = [&](double delta, double dmin, double dmax,
                    auto&& solver) -> std::pair<double, std::string> {
      if (delta < dmin - opts.tol.feas) return {kNan, "below_min"};
      if (delta > dmax + opts.tol.feas) return {0.0, "above_max"};
      return {solver(std::min(delta, dmax)), "ok"};
    };

    for (double delta : grid) {
      auto [fs_rate, fs_status] = eval(delta, fs_min, fs_max, [&](double d) {
        return best_fixed_set(model, k, d, setting, opts.tol).rate;
      });
      auto [irs_rate, irs_status] = eval(delta, irs_min, irs_max, [&](double d) {
        return usrdf_irs(model, k, d, setting, opts.tol, opts.irs).rate;
      });
      auto [mrs_rate, mrs_status] = eval(delta, mrs_min, mrs_max, [&](double d) {
        return usrdf_mrs(model, k, d, setting, opts.tol, opts.mrs).rate;
      });
      fs_col.rates.push_back(fs_rate);
      fs_col.statuses.push_back(fs_status);
      irs_col.rates.push_back(irs_rate);
      irs_col.statuses.push_back(irs_status);
      mrs_col.rates.push_back(mrs_rate);
      mrs_col.statuses.push_back(mrs_status);

      auto check = [&](double lhs, double rhs, const std::string& kind) {
        if (std::isnan(lhs) || std::isnan(rhs)) return;
        if (lhs > rhs + ordering_slack)
          rep.violations.push_back({delta, kind + "/" + setting_name(setting), lhs - rhs});
      };
      check(mrs_rate, irs_rate, "mrs<=irs");
      check(irs_rate, fs_rate, "irs<=best-fs");
    }
    rep.columns.push_back(std::move(fs_col));
    rep.columns.push_back(std::move(irs_col));
    rep.columns.push_back(std::move(mrs_col));
  }

  // Expected-distortion setting can never need more rate than the peak one.
  for (const auto& bayes_col : rep.columns) {
    if (bayes_col.setting != setting_name(Setting::Bayes)) continue;
    for (const auto& nb_col : rep.columns) {
      if (nb_col.setting != setting_name(Setting::NonBayes) || nb_col.sampler != bayes_col.sampler)
        continue;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double b = bayes_col.rates[g], n = nb_col.rates[g];
        if (std::isnan(b) || std::isnan(n)) continue;
        if (b > n + ordering_slack)
          rep.violations.push_back({grid[g], "bayes<=nonbayes/" + bayes_col.sampler, b - n});
      }
    }
  }
  return rep;
}

std::string curve_to_csv(const RDCurve& curve, const std::string& sampler,
                         const std::string& setting) {
  std::string out = "delta,rate,status,sampler,setting\n";
  for (const auto& p : curve.points)
    out += fmt(p.delta) + "," + fmt(p.rate) + "," + p.status + "," + sampler + "," + setting +
           "\n";
  return out;
}

std::string curve_to_json(const RDCurve& curve, const std::string& sampler,
                          const std::string& setting) {
  nlohmann::json j;
  j["problem"] = curve.problem;
  j["sampler"] = sampler;
  j["setting"] = setting;
  auto pts = nlohmann::json::array();
  for (const auto& p : curve.points) {
    nlohmann::json q;
    q["delta"] = p.delta;
    if (std::isnan(p.rate))
      q["rate"] = nullptr;
    else
      q["rate"] = p.rate;
    q["status"] = p.status;
    pts.push_back(q);
  }
  j["points"] = pts;
  return j.dump(2);
}

std::string comparison_to_csv(const ComparisonReport& report) {
  std::string out = "delta,rate,status,sampler,setting\n";
  for (const auto& col : report.columns)
    for (std::size_t g = 0; g < report.grid.size(); ++g)
      out += fmt(report.grid[g]) + "," + fmt(col.rates[g]) + "," + col.statuses[g] + "," +
             col.sampler + "," + col.setting + "\n";
  return out;
}

std::string comparison_to_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["grid"] = report.grid;
  auto cols = nlohmann::json::array();
  for (const auto& col : report.columns) {
    nlohmann::json c;
    c["sampler"] = col.sampler;
    c["setting"] = col.setting;
    auto rates = nlohmann::json::array();
    for (double r : col.rates) {
      if (std::isnan(r))
        rates.push_back(nullptr);
      else
        rates.push_back(r);
    }
    c["rates"] = rates;
    c["statuses"] = col.statuses;
    cols.push_back(c);
  }
  j["columns"] = cols;
  auto viols = nlohmann::json::array();
  for (const auto& v : report.violations) {
    nlohmann::json q;
    q["delta"] = v.delta;
    q["kind"] = v.kind;
    q["magnitude"] = v.magnitude;
    viols.push_back(q);
  }
  j["violations"] = viols;
  return j.dump(2);
}

}  // namespace usrd
