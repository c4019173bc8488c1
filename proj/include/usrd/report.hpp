#pragma once

#include <optional>
#include <string>
#include <vector>

#include "usrd/fixed.hpp"
#include "usrd/irs.hpp"
#include "usrd/model.hpp"
#include "usrd/mrs.hpp"

namespace usrd {

struct SamplerSpec {
  enum class Kind { FixedSet, Irs, Mrs };
  Kind kind = Kind::FixedSet;
  std::vector<int> A;  // FixedSet only
  int k = 1;

  std::string name() const;
};

struct SweepOptions {
  Tolerances tol;
  IrsOptions irs;
  MrsOptions mrs;
};

// Per-point solve across a distortion grid. Out-of-range points are marked:
// "below_min" points carry rate NaN, "above_max" points carry rate 0.
RDCurve sweep(const SourceModel& model, const SamplerSpec& spec, Setting setting,
              const std::vector<double>& grid, const SweepOptions& opts = {});

struct CurveViolation {
  double delta = 0.0;
  std::string kind;  // "monotonicity" | "convexity"
  double magnitude = 0.0;
};

// Monotonicity and chord-convexity audit of a solved curve; requires at least
// three usable points.
std::vector<CurveViolation> audit_curve(const RDCurve& curve, const Tolerances& tol = {});

struct ComparisonColumn {
  std::string sampler;  // "best-fs", "irs", "mrs"
  std::string setting;
  std::vector<double> rates;          // NaN where undefined
  std::vector<std::string> statuses;  // per grid point
};

struct ComparisonReport {
  std::vector<double> grid;
  std::vector<ComparisonColumn> columns;
  std::vector<CurveViolation> violations;  // ordering violations, kind names the pair
};

// Rates of best fixed set, IRS and MRS across the grid with the class
// ordering and Bayes-vs-nonBayes checks. `settings` lists which settings to
// evaluate (one or both).
ComparisonReport compare_samplers(const SourceModel& model, int k,
                                  const std::vector<Setting>& settings,
                                  const std::vector<double>& grid, const SweepOptions& opts = {},
                                  double ordering_slack = 1e-6);

std::string curve_to_csv(const RDCurve& curve, const std::string& sampler,
                         const std::string& setting);
std::string curve_to_json(const RDCurve& curve, const std::string& sampler,
                          const std::string& setting);
std::string comparison_to_csv(const ComparisonReport& report);
std::string comparison_to_json(const ComparisonReport& report);

}  // namespace usrd
