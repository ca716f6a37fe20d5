#include "sivwate/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "bounds";

void require_multiplier(double m) {
  if (!std::isfinite(m) || !(m >= 1.0)) {
    std::ostringstream s;
    s << "multiplier m must be >= 1, got " << m;
    throw Error(ErrorKind::config, kOrigin, s.str()).with_value(m);
  }
}

void require_range(double r) {
  if (!std::isfinite(r) || !(r >= 0.0)) {
    std::ostringstream s;
    s << "heterogeneity range r must be >= 0, got " << r;
    throw Error(ErrorKind::config, kOrigin, s.str()).with_value(r);
  }
}

template <class Endpoints>
GlobalBounds aggregate(const UnitEffects& units, double parameter, Endpoints endpoints) {
  if (units.used() == 0)
    throw_weak_instrument(kOrigin, "every row has a fitted treatment-rate gap below threshold",
                          0.0);
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < units.effect.size(); ++i) {
    if (!units.usable[i]) continue;
    const auto [a, b] = endpoints(units.effect[i], units.gap[i]);
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  const double n = static_cast<double>(units.used());
  return {parameter, lo / n, hi / n, units.used(), units.excluded};
}

}  // namespace

void BoundsConfig::validate() const {
  if (mode == Mode::absolute_range) {
    require_range(value);
  } else {
    require_multiplier(value);
  }
  for (double m : m_grid) require_multiplier(m);
}

BoundPair conditional_bounds(double sivwate_x, double compliance_gap_x, double r) {
  require_range(r);
  if (!(compliance_gap_x >= 0.0 && compliance_gap_x <= 1.0)) {
    std::ostringstream s;
    s << "compliance gap must lie in [0, 1], got " << compliance_gap_x;
    throw Error(ErrorKind::validation, kOrigin, s.str()).with_value(compliance_gap_x);
  }
  const double half = r * (1.0 - compliance_gap_x);
  return {sivwate_x - half, sivwate_x + half};
}

UnitEffects unit_effects(const ObservedDataset& data, const FittedNuisance& nuisance,
                         const EstimatorOptions& options) {
  auto g = unit_gaps(data, nuisance);
  UnitEffects u;
  u.effect.resize(data.size());
  u.usable.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool ok = g.treatment[i] > options.weak_iv_threshold;
    u.usable[i] = ok;
    u.effect[i] = ok ? g.outcome[i] / g.treatment[i] : 0.0;
    if (!ok) ++u.excluded;
  }
  u.gap = std::move(g.treatment);
  return u;
}

GlobalBounds global_bounds_multiplier(const UnitEffects& units, double m) {
  require_multiplier(m);
  const double k = m - 1.0 / m;
  return aggregate(units, m, [k](double e, double gap) {
    return std::pair{e * (1.0 - k + k * gap), e * (1.0 + k - k * gap)};
  });
}

GlobalBounds global_bounds_multiplier(const ObservedDataset& data, const FittedNuisance& nuisance,
                                      double m, const EstimatorOptions& options) {
  return global_bounds_multiplier(unit_effects(data, nuisance, options), m);
}

GlobalBounds global_bounds_absolute(const UnitEffects& units, double r) {
  require_range(r);
  return aggregate(units, r, [r](double e, double gap) {
    return std::pair{e - r * (1.0 - gap), e + r * (1.0 - gap)};
  });
}

std::vector<GlobalBounds> bounds_grid(const UnitEffects& units, const std::vector<double>& m_grid) {
  std::vector<GlobalBounds> rows;
  rows.reserve(m_grid.size());
  for (double m : m_grid) rows.push_back(global_bounds_multiplier(units, m));
  return rows;
}

std::vector<GlobalBounds> bounds_grid(const ObservedDataset& data, const FittedNuisance& nuisance,
                                      const std::vector<double>& m_grid,
                                      const EstimatorOptions& options) {
  return bounds_grid(unit_effects(data, nuisance, options), m_grid);
}

}  // namespace sivwate
