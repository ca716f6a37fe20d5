#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/stratifier.hpp"

namespace sivwate {

struct BootstrapPlan {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
  std::optional<Stratifier> strata;   // resample within levels when set
  unsigned workers = 1;               // results do not depend on this
  double max_failure_fraction = 0.2;  // unstable_bootstrap above this share

  void validate() const;
};

using Statistic = std::function<double(const ObservedDataset&)>;
// Several statistics evaluated on the same resample. A NaN entry marks a
// failure of that statistic alone.
using MultiStatistic = std::function<std::vector<double>(const ObservedDataset&)>;

// Row indices of replicate `r`: sampled with replacement inside each stratum,
// so every replicate has the same per-stratum counts as the data.
std::vector<std::size_t> resample_rows(const ObservedDataset& data, const BootstrapPlan& plan,
                                       std::size_t replicate);

struct ReplicateTable {
  std::size_t statistics = 0;
  std::size_t replicates = 0;
  std::vector<double> values;  // [statistic * replicates + replicate], NaN = failed

  std::vector<double> successful(std::size_t statistic) const;
  std::size_t failures(std::size_t statistic) const;
};

// Evaluates `statistic` on each replicate. A replicate whose evaluation throws
// a weak-IV, empty-cell, positivity or validation error counts as a failure of
// every statistic; other errors propagate.
ReplicateTable run_replicates(const ObservedDataset& data, std::size_t statistics,
                              const MultiStatistic& statistic, const BootstrapPlan& plan);

struct PercentileInterval {
  double lower = 0;
  double upper = 0;
  double level = 0.95;
  double standard_error = 0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
};

// Interval from one column of a replicate table. Throws unstable_bootstrap when
// the failure share exceeds plan.max_failure_fraction.
PercentileInterval percentile_interval(const ReplicateTable& table, std::size_t statistic,
                                       const BootstrapPlan& plan);
// Lower quantile of one column paired with the upper quantile of another.
PercentileInterval bonferroni_interval(const ReplicateTable& table, std::size_t lower_statistic,
                                       std::size_t upper_statistic, const BootstrapPlan& plan);

PercentileInterval percentile_ci(const Statistic& statistic, const ObservedDataset& data,
                                 const BootstrapPlan& plan);
PercentileInterval bonferroni_bounds_ci(const Statistic& lower_statistic,
                                        const Statistic& upper_statistic,
                                        const ObservedDataset& data, const BootstrapPlan& plan);

// Linear interpolation between order statistics: with sorted v and
// h = (n - 1) q, returns v[floor h] + (h - floor h) (v[floor h + 1] - v[floor h]).
double quantile(std::vector<double> values, double q);

}  // namespace sivwate
