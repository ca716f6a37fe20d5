#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sivwate/bootstrap.hpp"
#include "sivwate/bounds.hpp"
#include "sivwate/csv.hpp"
#include "sivwate/error.hpp"
#include "sivwate/estimators.hpp"
#include "sivwate/nuisance.hpp"
#include "sivwate/transform.hpp"

namespace sivwate {

enum class Method { wald, regression, weighting };

std::string to_string(Method m);

// Covariate function with finite levels: a categorical covariate, or a
// continuous one cut at the given points.
struct LevelSpec {
  std::string covariate;
  std::vector<double> cutpoints;

  Stratifier build(const CovariateSchema& schema) const;
};

struct SensitivityConfig {
  double numerator = 0;                 // assumed negative-weight mass
  std::optional<double> denominator;    // IV strength; estimated from data when absent
  double effect_gap_bound = 0;          // on the report scale
};

struct AnalysisConfig {
  std::filesystem::path input;
  std::filesystem::path output;              // JSON report
  std::optional<std::filesystem::path> markdown;
  CovariateSchema schema;
  ColumnMap columns;
  NuisanceSpecs nuisance = NuisanceSpecs::main_effects();
  std::vector<Method> methods{Method::wald, Method::regression, Method::weighting};
  std::vector<OutcomeTransform> transforms{OutcomeTransform::identity()};
  std::optional<LevelSpec> subgroup;
  SubgroupFit subgroup_fit = SubgroupFit::shared;
  bool profile = true;
  std::size_t replicates = 1000;  // 0 disables the bootstrap
  std::uint64_t seed = 1;
  double level = 0.95;
  double max_failure_fraction = 0.2;
  std::optional<LevelSpec> strata;
  std::optional<BoundsConfig> bounds;
  std::optional<SensitivityConfig> sensitivity;
  EstimatorOptions estimator;
  double scale = 1.0;
  int decimals = -1;  // markdown rounding; -1 picks 1 at scale >= 1000, else 4

  void validate() const;
};

// JSON configuration. Relative paths resolve against `base_dir`. Errors are
// config errors naming the offending field.
AnalysisConfig parse_analysis_config(std::string_view json_text,
                                     const std::filesystem::path& base_dir = {});
AnalysisConfig load_analysis_config(const std::filesystem::path& path);

struct AnalysisReport {
  std::string json;      // full precision
  std::string markdown;  // rounded tables
};

// Runs every configured estimator, the profile, bounds and sensitivity block,
// with bootstrap intervals. Output is identical for any worker count.
AnalysisReport run_analysis(const AnalysisConfig& config, const ObservedDataset& data,
                            unsigned workers = 1);

// Machine-readable error block: {"error": {"kind", "origin", "message", ...}}.
std::string error_report_json(const Error& error);

}  // namespace sivwate
