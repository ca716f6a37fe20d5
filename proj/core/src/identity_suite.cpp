#include "sivwate/identity_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sivwate/bounds.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/error.hpp"
#include "sivwate/rng.hpp"
#include "sivwate/sensitivity.hpp"

namespace sivwate {

namespace {

using Check = std::function<double(const LatentDgp&)>;

double median_support(const LatentDgp& dgp) {
  auto ys = dgp.tables().y_support;
  std::sort(ys.begin(), ys.end());
  return ys[(ys.size() - 1) / 2];
}

double regression_form(const LatentDgp& dgp) {
  const auto truth = population_truth(dgp);
  double worst = std::abs(population_rhs_prop1(dgp, OutcomeTransform::identity(), Arm::difference) -
                          truth.sivwate);
  for (const auto& g : {OutcomeTransform::identity(), OutcomeTransform::indicator(median_support(dgp))})
    for (Arm arm : {Arm::treated, Arm::untreated, Arm::difference})
      worst = std::max(worst, std::abs(population_rhs_prop1(dgp, g, arm) -
                                       weighted_potential_mean(dgp, g, arm)));
  return worst;
}

double weighting_form(const LatentDgp& dgp) {
  double worst = 0;
  for (const auto& g : {OutcomeTransform::identity(), OutcomeTransform::indicator(median_support(dgp))})
    for (Arm arm : {Arm::treated, Arm::untreated, Arm::difference})
      worst = std::max(worst, std::abs(population_rhs_prop2(dgp, g, arm) -
                                       population_rhs_prop1(dgp, g, arm)));
  return worst;
}

double subgroup_form(const LatentDgp& dgp) {
  double worst = 0;
  std::size_t defined = 0;
  const auto& schema = dgp.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& c = schema.covariates()[j];
    Stratifier v = c.kind == CovariateKind::categorical
                       ? Stratifier::by_covariate(schema, c.name)
                       : Stratifier::by_cutpoints(schema, c.name, {[&] {
                           std::vector<double> vals;
                           for (std::size_t x = 0; x < dgp.x_count(); ++x)
                             vals.push_back(dgp.x_value(x)[j]);
                           std::sort(vals.begin(), vals.end());
                           return vals[vals.size() / 2];
                         }()});
    for (std::size_t level = 0; level < v.levels(); ++level) {
      try {
        const auto g = OutcomeTransform::identity();
        worst = std::max(worst,
                         std::abs(population_rhs_subgroup(dgp, g, v, level) -
                                  weighted_potential_mean_given(dgp, g, Arm::difference, v, level)));
        ++defined;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::weak_instrument) throw;
      }
    }
  }
  for (const auto& v : default_profile(schema)) {
    worst = std::max(worst, std::abs(population_weighted_covariate_mean(dgp, v) -
                                     weighted_covariate_mean(dgp, v)));
    ++defined;
  }
  if (defined == 0) throw_weak_instrument("identity_suite", "every subgroup", 0.0);
  return worst;
}

double bounds_containment(const LatentDgp& dgp) {
  if (!validate_dgp(dgp).iva4)
    throw Error(ErrorKind::undefined_estimand, "identity_suite",
                "range bounds need non-negative weights");
  double worst = 0;
  std::size_t defined = 0;
  for (const auto& c : conditional_truth(dgp)) {
    if (!c.sivwate || c.p_x <= 0) continue;
    const double gap = std::clamp(c.compliance_gap, 0.0, 1.0);
    const auto b = conditional_bounds(*c.sivwate, gap, c.effect_max - c.effect_min);
    worst = std::max({worst, b.lower - c.ate, c.ate - b.upper});
    ++defined;
  }
  if (defined == 0) throw_weak_instrument("identity_suite", "every x stratum", 0.0);
  return worst;
}

double bias_identity(const LatentDgp& dgp) {
  return std::abs(population_bias_check(dgp).residual);
}

double lambda_identity(const LatentDgp& dgp) {
  const auto truth = population_truth(dgp);
  double negative = 0, total = 0;
  for (std::size_t x = 0; x < dgp.x_count(); ++x)
    for (std::size_t u = 0; u < dgp.u_count(); ++u) {
      const double m = dgp.p_xu(x, u) * dgp.weight(x, u);
      total += m;
      if (dgp.weight(x, u) < 0) negative += m;
    }
  return std::abs(truth.lambda - (-negative / total));
}

bool skippable(ErrorKind k) {
  return k == ErrorKind::weak_instrument || k == ErrorKind::undefined_estimand ||
         k == ErrorKind::positivity;
}

}  // namespace

bool IdentitySummary::passed() const noexcept {
  return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.passed(); });
}

IdentitySummary check_identities(const std::string& group, const std::vector<LatentDgp>& dgps,
                                 double tolerance) {
  const std::vector<std::pair<std::string, Check>> checks = {
      {"regression-form", regression_form}, {"weighting-form", weighting_form},
      {"subgroup", subgroup_form},          {"bounds", bounds_containment},
      {"bias", bias_identity},              {"lambda", lambda_identity},
  };
  IdentitySummary s;
  s.group = group;
  s.dgps = dgps.size();
  for (const auto& [name, check] : checks) {
    IdentityRow row;
    row.identity = name;
    row.tolerance = name == "lambda" ? std::min(tolerance, 1e-12) : tolerance;
    for (const auto& dgp : dgps) {
      try {
        const double r = check(dgp);
        row.max_residual = std::isnan(r) ? INFINITY : std::max(row.max_residual, r);
        ++row.cases;
      } catch (const Error& e) {
        if (!skippable(e.kind())) throw;
        ++row.skipped;
      }
    }
    s.rows.push_back(row);
  }
  for (const auto& dgp : dgps) {
    try {
      s.max_lambda = std::max(s.max_lambda, population_truth(dgp).lambda);
    } catch (const Error& e) {
      if (!skippable(e.kind())) throw;
    }
  }
  return s;
}

std::vector<IdentitySummary> builtin_identity_suite(std::size_t per_group, std::uint64_t seed) {
  auto sizes_for = [seed](std::size_t i, bool violate) {
    auto gen = make_engine(seed, 0x512E + i);
    DgpSizes s;
    s.x = 1 + uniform_index(gen, 4);
    s.u = 1 + uniform_index(gen, 4);
    s.y = 2 + uniform_index(gen, 2);
    if (violate && s.x * s.u < 2) s.u = 2;
    return s;
  };
  std::vector<LatentDgp> monotone, violating, dcc;
  for (std::size_t i = 0; i < per_group; ++i) {
    RandomDgpOptions o;
    o.sizes = sizes_for(i, false);
    o.seed = derive_seed(seed, i);
    monotone.push_back(random_dgp(o));
    o.sizes = sizes_for(i + per_group, true);
    o.monotonicity = Monotonicity::violate;
    violating.push_back(random_dgp(o));
    dcc.push_back(random_dcc_dgp(derive_seed(seed, i + 2 * per_group), 1 + i % 4, 2 + i % 2,
                                 i % 2 == 1));
  }
  return {check_identities("monotone", monotone), check_identities("violating", violating),
          check_identities("deterministic-compliance", dcc)};
}

}  // namespace sivwate
