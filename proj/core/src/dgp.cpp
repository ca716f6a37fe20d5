#include "sivwate/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sivwate/error.hpp"
#include "sivwate/rng.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "dgp_oracle";
constexpr double kSumTolerance = 1e-12;

std::string path(const std::string& field, std::initializer_list<std::size_t> idx) {
  std::ostringstream s;
  s << field;
  for (auto i : idx) s << '[' << i << ']';
  return s.str();
}

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::validation, kOrigin, where + ": " + what);
}

void check_probability(double p, const std::string& where) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    std::ostringstream s;
    s.precision(17);
    s << "probability " << p << " outside [0, 1]";
    invalid(where, s.str());
  }
}

void check_sum(double sum, const std::string& where) {
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream s;
    s.precision(17);
    s << "probabilities sum to " << sum << ", expected 1";
    invalid(where, s.str());
  }
}

const OutcomeTransform& identity_transform() {
  static const OutcomeTransform g = OutcomeTransform::identity();
  return g;
}

// f(d, y) applied to the observable law for each arm of the identification formulas.
double arm_integrand(Arm arm, int d, double gy) {
  switch (arm) {
    case Arm::treated: return d * gy;
    case Arm::untreated: return (1 - d) * gy;
    case Arm::difference: return gy;
  }
  return gy;
}

double arm_sign(Arm arm) { return arm == Arm::untreated ? -1.0 : 1.0; }

}  // namespace

LatentDgp::LatentDgp(DgpTables tables) : t_(std::move(tables)) {
  const std::size_t nx = t_.x_support.size();
  const std::size_t nu = t_.u_support.size();
  const std::size_t ny = t_.y_support.size();
  if (nx == 0) invalid("x_support", "empty");
  if (nu == 0) invalid("u_support", "empty");
  if (ny == 0) invalid("y_support", "empty");

  for (std::size_t x = 0; x < nx; ++x) {
    const auto& xv = t_.x_support[x];
    if (xv.size() != t_.schema.size())
      invalid(path("x_support", {x}), "width " + std::to_string(xv.size()) +
                                          " does not match schema width " +
                                          std::to_string(t_.schema.size()));
    for (std::size_t j = 0; j < xv.size(); ++j) {
      if (!std::isfinite(xv[j])) invalid(path("x_support", {x, j}), "non-finite value");
      if (t_.schema[j].kind == CovariateKind::categorical) {
        if (xv[j] < 0 || xv[j] >= static_cast<double>(t_.schema[j].levels.size()) ||
            xv[j] != std::floor(xv[j]))
          invalid(path("x_support", {x, j}), "categorical code out of range");
      }
    }
    for (std::size_t x2 = 0; x2 < x; ++x2)
      if (t_.x_support[x2] == xv) invalid(path("x_support", {x}), "duplicate covariate value");
  }
  {
    auto sorted = t_.y_support;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      invalid("y_support", "values must be distinct");
    for (std::size_t k = 0; k < ny; ++k)
      if (!std::isfinite(t_.y_support[k])) invalid(path("y_support", {k}), "non-finite value");
  }

  if (t_.p_xu.rows != nx || t_.p_xu.cols != nu || t_.p_xu.data.size() != nx * nu)
    invalid("p_xu", "expected a " + std::to_string(nx) + " x " + std::to_string(nu) + " table");
  double total = 0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t u = 0; u < nu; ++u) {
      check_probability(t_.p_xu(x, u), path("p_xu", {x, u}));
      total += t_.p_xu(x, u);
    }
  check_sum(total, "p_xu");

  if (t_.e_z.size() != nx) invalid("e_z", "expected " + std::to_string(nx) + " entries");
  for (std::size_t x = 0; x < nx; ++x) check_probability(t_.e_z[x], path("e_z", {x}));

  for (int z = 0; z < 2; ++z) {
    const std::string field = z == 0 ? "p_d.z0" : "p_d.z1";
    const auto& m = t_.p_d[z];
    if (m.rows != nx || m.cols != nu || m.data.size() != nx * nu)
      invalid(field, "expected a " + std::to_string(nx) + " x " + std::to_string(nu) + " table");
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) check_probability(m(x, u), path(field, {x, u}));
  }

  for (int d = 0; d < 2; ++d) {
    const std::string field = d == 0 ? "law_y.d0" : "law_y.d1";
    const auto& law = t_.law_y[d];
    if (law.size() != nx) invalid(field, "expected " + std::to_string(nx) + " x-blocks");
    for (std::size_t x = 0; x < nx; ++x) {
      if (law[x].size() != nu)
        invalid(path(field, {x}), "expected " + std::to_string(nu) + " u-blocks");
      for (std::size_t u = 0; u < nu; ++u) {
        if (law[x][u].size() != ny)
          invalid(path(field, {x, u}), "expected " + std::to_string(ny) + " probabilities");
        double s = 0;
        for (std::size_t k = 0; k < ny; ++k) {
          check_probability(law[x][u][k], path(field, {x, u, k}));
          s += law[x][u][k];
        }
        check_sum(s, path(field, {x, u}));
      }
    }
  }

  p_x_.assign(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t u = 0; u < nu; ++u) p_x_[x] += t_.p_xu(x, u);
}

double LatentDgp::p_u_given_x(std::size_t x, std::size_t u) const {
  return p_x_[x] > 0 ? t_.p_xu(x, u) / p_x_[x] : 0.0;
}

double LatentDgp::potential_mean(int d, std::size_t x, std::size_t u,
                                 const OutcomeTransform& g) const {
  const auto law = law_y(d, x, u);
  double m = 0;
  for (std::size_t k = 0; k < law.size(); ++k)
    if (law[k] > 0) m += law[k] * g(t_.y_support[k]);
  return m;
}

double LatentDgp::stratum_effect(std::size_t x, std::size_t u) const {
  return potential_mean(1, x, u, identity_transform()) -
         potential_mean(0, x, u, identity_transform());
}

AssumptionReport validate_dgp(const LatentDgp& dgp) {
  AssumptionReport report;
  report.iva4 = true;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u)
      if (dgp.p_xu(x, u) > 0 && dgp.weight(x, u) < 0) {
        report.iva4 = false;
        report.violations.emplace_back(x, u);
      }
  const ObservableLaw law(dgp);
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    if (law.p_x(x) > 0 && law.treatment_rate(1, x) > law.treatment_rate(0, x)) report.iva2 = true;
  return report;
}

Matrix weight_table(const LatentDgp& dgp) {
  Matrix w(dgp.x_count(), dgp.u_count());
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u) w(x, u) = dgp.weight(x, u);
  return w;
}

PopulationTruth population_truth(const LatentDgp& dgp) {
  PopulationTruth t;
  t.weight_table = weight_table(dgp);
  double mass = 0, num = 0;
  double mass_pos = 0, num_pos = 0;
  double mass_neg = 0, num_neg = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u) {
      const double w = t.weight_table(x, u);
      const double p = dgp.p_xu(x, u);
      const double tau = dgp.stratum_effect(x, u);
      mass += w * p;
      num += tau * w * p;
      if (w >= 0) {
        t.positive_set.emplace_back(x, u);
        mass_pos += w * p;
        num_pos += tau * w * p;
      } else {
        mass_neg += w * p;
        num_neg += tau * w * p;
      }
    }
  if (mass <= kDefaultWeakIvThreshold) throw_weak_instrument(kOrigin, "E[w(X,U)]", mass);
  if (mass_pos <= 0)
    throw Error(ErrorKind::undefined_estimand, kOrigin,
                "PSIVWATE undefined: no positive weight mass");
  t.iv_strength = mass;
  t.sivwate = num / mass;
  t.psivwate = num_pos / mass_pos;
  if (mass_neg < 0) t.nsivwate = num_neg / mass_neg;
  t.lambda = mass_neg < 0 ? -mass_neg / mass : 0.0;
  t.naive_estimand = population_rhs_prop1(dgp, identity_transform(), Arm::difference);
  return t;
}

ObservableLaw::ObservableLaw(const LatentDgp& dgp) {
  const std::size_t nx = dgp.x_count(), nu = dgp.u_count(), ny = dgp.y_count();
  p_x_.resize(nx);
  e_z_.resize(nx);
  y_support_ = dgp.tables().y_support;
  p_dy_.assign(2 * nx * 2 * ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    p_x_[x] = dgp.p_x(x);
    e_z_[x] = dgp.e_z(x);
    for (int z = 0; z < 2; ++z)
      for (std::size_t u = 0; u < nu; ++u) {
        const double pu = dgp.p_u_given_x(x, u);
        if (pu == 0) continue;
        for (int d = 0; d < 2; ++d) {
          const double pd = d == 1 ? dgp.p_d(z, x, u) : 1.0 - dgp.p_d(z, x, u);
          const auto law = dgp.law_y(d, x, u);
          for (std::size_t k = 0; k < ny; ++k)
            p_dy_[((z * nx + x) * 2 + d) * ny + k] += pu * pd * law[k];
        }
      }
  }
}

double ObservableLaw::p_dy(int z, std::size_t x, int d, std::size_t k) const {
  return p_dy_[((z * x_count() + x) * 2 + d) * y_count() + k];
}

double ObservableLaw::treatment_rate(int z, std::size_t x) const {
  double s = 0;
  for (std::size_t k = 0; k < y_count(); ++k) s += p_dy(z, x, 1, k);
  return s;
}

double ObservableLaw::joint(std::size_t x, int z, int d, std::size_t k) const {
  const double pz = z == 1 ? e_z_[x] : 1.0 - e_z_[x];
  return p_x_[x] * pz * p_dy(z, x, d, k);
}

namespace {

// E[f(D, Y) | Z = 1, x] - E[f(D, Y) | Z = 0, x] with f from the arm.
double outcome_gap(const ObservableLaw& law, std::size_t x, const OutcomeTransform& g, Arm arm) {
  double gap = 0;
  for (int d = 0; d < 2; ++d)
    for (std::size_t k = 0; k < law.y_count(); ++k) {
      const double f = arm_integrand(arm, d, g(law.y_value(k)));
      gap += (law.p_dy(1, x, d, k) - law.p_dy(0, x, d, k)) * f;
    }
  return gap;
}

double treatment_gap(const ObservableLaw& law, std::size_t x) {
  return law.treatment_rate(1, x) - law.treatment_rate(0, x);
}

}  // namespace

double population_rhs_prop1(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm) {
  const ObservableLaw law(dgp);
  double num = 0, den = 0;
  for (std::size_t x = 0; x < law.x_count(); ++x) {
    if (law.p_x(x) == 0) continue;
    num += law.p_x(x) * outcome_gap(law, x, g, arm);
    den += law.p_x(x) * treatment_gap(law, x);
  }
  if (den <= kDefaultWeakIvThreshold)
    throw_weak_instrument(kOrigin, "E[P(D=1|Z=1,X) - P(D=1|Z=0,X)]", den);
  return arm_sign(arm) * num / den;
}

double population_rhs_prop2(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm) {
  const ObservableLaw law(dgp);
  double num = 0, den = 0;
  for (std::size_t x = 0; x < law.x_count(); ++x) {
    if (law.p_x(x) == 0) continue;
    const double e = law.e_z(x);
    if (e <= 0.0 || e >= 1.0) {
      std::ostringstream s;
      s << "instrument propensity " << e << " at x index " << x << " violates positivity";
      throw Error(ErrorKind::positivity, kOrigin, s.str()).with_value(e);
    }
    for (int z = 0; z < 2; ++z) {
      const double kappa = (z - e) / (e * (1.0 - e));
      for (int d = 0; d < 2; ++d)
        for (std::size_t k = 0; k < law.y_count(); ++k) {
          const double p = law.joint(x, z, d, k);
          if (p == 0) continue;
          num += p * kappa * arm_integrand(arm, d, g(law.y_value(k)));
          den += p * kappa * d;
        }
    }
  }
  if (std::abs(den) <= kDefaultWeakIvThreshold) throw_weak_instrument(kOrigin, "E[kappa D]", den);
  return arm_sign(arm) * num / den;
}

double population_rhs_subgroup(const LatentDgp& dgp, const OutcomeTransform& g,
                               const Stratifier& v, std::size_t level) {
  const ObservableLaw law(dgp);
  double num = 0, den = 0;
  for (std::size_t x = 0; x < law.x_count(); ++x) {
    if (law.p_x(x) == 0 || v.level_of(dgp.x_value(x)) != level) continue;
    num += law.p_x(x) * outcome_gap(law, x, g, Arm::difference);
    den += law.p_x(x) * treatment_gap(law, x);
  }
  if (den <= kDefaultWeakIvThreshold)
    throw_weak_instrument(kOrigin, "subgroup '" + v.level_names.at(level) + "'", den);
  return num / den;
}

double population_weighted_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v) {
  const ObservableLaw law(dgp);
  double num = 0, den = 0;
  for (std::size_t x = 0; x < law.x_count(); ++x) {
    if (law.p_x(x) == 0) continue;
    const double gap = treatment_gap(law, x);
    num += law.p_x(x) * v.value(dgp.x_value(x)) * gap;
    den += law.p_x(x) * gap;
  }
  if (den <= kDefaultWeakIvThreshold)
    throw_weak_instrument(kOrigin, "E[P(D=1|Z=1,X) - P(D=1|Z=0,X)]", den);
  return num / den;
}

double population_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v) {
  double m = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    if (dgp.p_x(x) > 0) m += dgp.p_x(x) * v.value(dgp.x_value(x));
  return m;
}

namespace {

template <class Select>
double weighted_mean_impl(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm,
                          Select&& include_x) {
  double num = 0, den = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x) {
    if (!include_x(x)) continue;
    for (std::size_t u = 0; u < dgp.u_count(); ++u) {
      const double p = dgp.p_xu(x, u);
      if (p == 0) continue;
      const double w = dgp.weight(x, u);
      double m = 0;
      switch (arm) {
        case Arm::treated: m = dgp.potential_mean(1, x, u, g); break;
        case Arm::untreated: m = dgp.potential_mean(0, x, u, g); break;
        case Arm::difference:
          m = dgp.potential_mean(1, x, u, g) - dgp.potential_mean(0, x, u, g);
          break;
      }
      num += p * w * m;
      den += p * w;
    }
  }
  if (den <= kDefaultWeakIvThreshold) throw_weak_instrument(kOrigin, "E[w(X,U)]", den);
  return num / den;
}

}  // namespace

double weighted_potential_mean(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm) {
  return weighted_mean_impl(dgp, g, arm, [](std::size_t) { return true; });
}

double weighted_potential_mean_given(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm,
                                     const Stratifier& v, std::size_t level) {
  return weighted_mean_impl(dgp, g, arm,
                            [&](std::size_t x) { return v.level_of(dgp.x_value(x)) == level; });
}

double weighted_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v) {
  double num = 0, den = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u) {
      const double pw = dgp.p_xu(x, u) * dgp.weight(x, u);
      num += pw * v.value(dgp.x_value(x));
      den += pw;
    }
  if (den <= kDefaultWeakIvThreshold) throw_weak_instrument(kOrigin, "E[w(X,U)]", den);
  return num / den;
}

std::vector<ConditionalTruth> conditional_truth(const LatentDgp& dgp) {
  const ObservableLaw law(dgp);
  std::vector<ConditionalTruth> out(dgp.x_count());
  for (std::size_t x = 0; x < dgp.x_count(); ++x) {
    auto& c = out[x];
    c.p_x = dgp.p_x(x);
    if (c.p_x == 0) continue;
    c.observable_gap = law.treatment_rate(1, x) - law.treatment_rate(0, x);
    double wsum = 0, wtau = 0;
    bool first = true;
    for (std::size_t u = 0; u < dgp.u_count(); ++u) {
      const double pu = dgp.p_u_given_x(x, u);
      if (pu == 0) continue;
      const double tau = dgp.stratum_effect(x, u);
      const double w = dgp.weight(x, u);
      c.ate += pu * tau;
      wsum += pu * w;
      wtau += pu * w * tau;
      c.effect_min = first ? tau : std::min(c.effect_min, tau);
      c.effect_max = first ? tau : std::max(c.effect_max, tau);
      first = false;
    }
    c.compliance_gap = wsum;
    if (wsum > kDefaultWeakIvThreshold) c.sivwate = wtau / wsum;
  }
  return out;
}

double global_ate(const LatentDgp& dgp) {
  double ate = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u)
      ate += dgp.p_xu(x, u) * dgp.stratum_effect(x, u);
  return ate;
}

ObservedDataset sample_dataset(const LatentDgp& dgp, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::validation, kOrigin, "sample size must be at least 1");
  const std::size_t nx = dgp.x_count(), nu = dgp.u_count(), ny = dgp.y_count();

  std::vector<double> cum_xu(nx * nu);
  std::partial_sum(dgp.tables().p_xu.data.begin(), dgp.tables().p_xu.data.end(),
                   cum_xu.begin());
  std::vector<double> cum_y(2 * nx * nu * ny);
  for (int d = 0; d < 2; ++d)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) {
        const auto law = dgp.law_y(d, x, u);
        std::partial_sum(law.begin(), law.end(), cum_y.begin() + ((d * nx + x) * nu + u) * ny);
      }
  auto draw = [](Engine& gen, const double* first, std::size_t count) {
    const double r = uniform01(gen) * first[count - 1];
    // upper_bound never lands on a zero-mass cell since r < total.
    const auto k = static_cast<std::size_t>(std::upper_bound(first, first + count, r) - first);
    return std::min(k, count - 1);
  };

  Engine gen = make_engine(seed);
  const std::size_t p = dgp.schema().size();
  std::vector<double> y(n), x(n * p);
  std::vector<std::uint8_t> d(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cell = draw(gen, cum_xu.data(), cum_xu.size());
    const std::size_t xi = cell / nu, ui = cell % nu;
    const int zi = uniform01(gen) < dgp.e_z(xi) ? 1 : 0;
    const int di = uniform01(gen) < dgp.p_d(zi, xi, ui) ? 1 : 0;
    const std::size_t k = draw(gen, cum_y.data() + ((di * nx + xi) * nu + ui) * ny, ny);
    y[i] = dgp.y_value(k);
    d[i] = static_cast<std::uint8_t>(di);
    z[i] = static_cast<std::uint8_t>(zi);
    std::copy(dgp.x_value(xi).begin(), dgp.x_value(xi).end(), x.begin() + i * p);
  }
  return ObservedDataset(dgp.schema(), std::move(y), std::move(d), std::move(z), std::move(x));
}

ObservedDataset expand_population(const LatentDgp& dgp, std::size_t n) {
  const ObservableLaw law(dgp);
  std::vector<double> y, x;
  std::vector<std::uint8_t> d, z;
  for (std::size_t xi = 0; xi < law.x_count(); ++xi)
    for (int zi = 0; zi < 2; ++zi)
      for (int di = 0; di < 2; ++di)
        for (std::size_t k = 0; k < law.y_count(); ++k) {
          const double expected = law.joint(xi, zi, di, k) * static_cast<double>(n);
          const double count = std::round(expected);
          if (std::abs(expected - count) > 1e-6) {
            std::ostringstream s;
            s.precision(17);
            s << "population size " << n << " gives non-integer count " << expected
              << " for cell (x=" << xi << ", z=" << zi << ", d=" << di << ", y=" << k << ")";
            throw Error(ErrorKind::validation, kOrigin, s.str());
          }
          for (std::size_t c = 0; c < static_cast<std::size_t>(count); ++c) {
            y.push_back(law.y_value(k));
            d.push_back(static_cast<std::uint8_t>(di));
            z.push_back(static_cast<std::uint8_t>(zi));
            x.insert(x.end(), dgp.x_value(xi).begin(), dgp.x_value(xi).end());
          }
        }
  if (y.size() != n)
    throw Error(ErrorKind::validation, kOrigin,
                "expanded population has " + std::to_string(y.size()) + " rows, expected " +
                    std::to_string(n));
  return ObservedDataset(dgp.schema(), std::move(y), std::move(d), std::move(z), std::move(x));
}

}  // namespace sivwate
