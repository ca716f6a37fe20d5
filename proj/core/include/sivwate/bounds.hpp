#pragma once

#include <cstddef>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/estimators.hpp"
#include "sivwate/nuisance.hpp"

namespace sivwate {

struct BoundsConfig {
  enum class Mode { absolute_range, multiplier };
  Mode mode = Mode::multiplier;
  double value = 1.0;            // r in absolute-range mode, m in multiplier mode
  std::vector<double> m_grid;    // optional grid (multiplier mode)

  // r >= 0, every m >= 1, all finite. Throws a config error.
  void validate() const;
};

struct BoundPair {
  double lower = 0;
  double upper = 0;
};

// Conditional ATE range given E_Q[Y(1) - Y(0) | x], the compliance gap at x
// and an effect-heterogeneity range r.
BoundPair conditional_bounds(double sivwate_x, double compliance_gap_x, double r);

// Per-row plug-in effects E_Q[Y(1) - Y(0) | x_i] and treatment-rate gaps.
// Rows whose fitted gap falls below the weak-IV threshold are excluded.
struct UnitEffects {
  std::vector<double> effect;
  std::vector<double> gap;
  std::vector<char> usable;
  std::size_t excluded = 0;

  std::size_t used() const noexcept { return effect.size() - excluded; }
};

UnitEffects unit_effects(const ObservedDataset& data, const FittedNuisance& nuisance,
                         const EstimatorOptions& options = {});

struct GlobalBounds {
  double parameter = 0;  // m or r
  double lower = 0;
  double upper = 0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

// Multiplier form: for each usable row both closed-form endpoints are
// evaluated with r_i = (m - 1/m) E_Q_i, sorted, and then averaged over rows.
GlobalBounds global_bounds_multiplier(const UnitEffects& units, double m);
GlobalBounds global_bounds_multiplier(const ObservedDataset& data, const FittedNuisance& nuisance,
                                      double m, const EstimatorOptions& options = {});

// Same aggregation with a common absolute range r.
GlobalBounds global_bounds_absolute(const UnitEffects& units, double r);

std::vector<GlobalBounds> bounds_grid(const UnitEffects& units, const std::vector<double>& m_grid);
std::vector<GlobalBounds> bounds_grid(const ObservedDataset& data, const FittedNuisance& nuisance,
                                      const std::vector<double>& m_grid,
                                      const EstimatorOptions& options = {});

}  // namespace sivwate
