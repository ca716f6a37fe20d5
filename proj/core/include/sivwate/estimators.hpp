#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/error.hpp"
#include "sivwate/nuisance.hpp"
#include "sivwate/stratifier.hpp"
#include "sivwate/transform.hpp"

namespace sivwate {

enum class Estimand {
  wald,
  sivwate_regression,
  sivwate_weighting,
  q_mean_treated,
  q_mean_untreated,
  subgroup_sivwate,
  weighted_covariate_mean,
};

std::string to_string(Estimand e);

struct Interval {
  double lower = 0;
  double upper = 0;
  double level = 0.95;
};

struct EstimateReport {
  Estimand estimand = Estimand::wald;
  double point = 0;
  double denominator = 0;  // estimated IV strength (mean treatment-rate gap)
  std::size_t n = 0;
  std::optional<Interval> interval;
  std::size_t clamped_rows = 0;  // weighting only: rows whose propensity was clamped
  std::vector<std::string> notes;
};

struct EstimatorOptions {
  double weak_iv_threshold = kDefaultWeakIvThreshold;
  double propensity_clamp = 1e-6;        // e(x) clamped to [c, 1 - c]
  double max_clamped_fraction = 0.01;    // positivity error above this share
};

// [mean(Y|Z=1) - mean(Y|Z=0)] / [mean(D|Z=1) - mean(D|Z=0)]
EstimateReport estimate_wald(const ObservedDataset& data, const EstimatorOptions& options = {});

// Per-row fitted gaps mu_y(1, x_i) - mu_y(0, x_i) and mu_d(1, x_i) - mu_d(0, x_i).
struct UnitGaps {
  std::vector<double> outcome;
  std::vector<double> treatment;
};
UnitGaps unit_gaps(const ObservedDataset& data, const FittedNuisance& nuisance);

EstimateReport estimate_sivwate_regression(const ObservedDataset& data,
                                           const FittedNuisance& nuisance,
                                           const EstimatorOptions& options = {});

// E_Q[g(Y(1))] (treated) or E_Q[g(Y(0))] (untreated) from per-arm regressions
// of D g(Y) or (1 - D) g(Y), fit with the outcome model's design. Arm::difference
// regresses g(Y) directly.
EstimateReport estimate_q_mean(const ObservedDataset& data, const FittedNuisance& nuisance,
                               const OutcomeTransform& g, Arm arm,
                               const EstimatorOptions& options = {});

// Instrument-propensity weighting: kappa_i = (z_i - e_i) / (e_i (1 - e_i)),
// point = sum kappa_i f_i / sum kappa_i d_i with f from the arm.
EstimateReport estimate_sivwate_weighting(const ObservedDataset& data,
                                          const ConditionalMean& propensity,
                                          const OutcomeTransform& g,
                                          const EstimatorOptions& options = {},
                                          Arm arm = Arm::difference);

enum class SubgroupFit { shared, per_level };

struct SubgroupEstimate {
  std::string level;
  std::size_t rows = 0;
  std::optional<EstimateReport> report;
  std::optional<std::string> error;  // per-level failure; other levels still reported
};

std::vector<SubgroupEstimate> estimate_subgroup_sivwate(
    const ObservedDataset& data, const FittedNuisance& nuisance, const Stratifier& v,
    const EstimatorOptions& options = {}, SubgroupFit fit = SubgroupFit::shared);

struct ProfileRow {
  std::string name;
  double weighted = 0;    // E_Q[V]
  double unweighted = 0;  // E[V]
  double ratio = 0;       // weighted / unweighted (NaN when E[V] = 0)
};

std::vector<ProfileRow> weighted_covariate_profile(const ObservedDataset& data,
                                                   const FittedNuisance& nuisance,
                                                   const std::vector<CovariateFunction>& v_list,
                                                   const EstimatorOptions& options = {});

}  // namespace sivwate
