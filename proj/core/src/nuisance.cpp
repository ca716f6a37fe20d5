#include "sivwate/nuisance.hpp"

#include <algorithm>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "nuisance";

NuisanceSpecs uniform_specs(DesignKind design) {
  NuisanceSpecs s;
  s.outcome.design = design;
  s.treatment.design = design;
  s.instrument.design = design;
  s.treatment.family = Family::logistic;
  s.instrument.family = Family::logistic;
  return s;
}

void require_probability_model(const RegressionSpec& spec, const char* which) {
  spec.validate();
  if (spec.family == Family::linear && spec.design != DesignKind::saturated)
    throw Error(ErrorKind::config, kOrigin,
                std::string(which) + " model must be logistic so predictions stay in [0, 1]");
}

}  // namespace

NuisanceSpecs NuisanceSpecs::saturated() { return uniform_specs(DesignKind::saturated); }
NuisanceSpecs NuisanceSpecs::intercept_only() { return uniform_specs(DesignKind::intercept_only); }
NuisanceSpecs NuisanceSpecs::main_effects() { return uniform_specs(DesignKind::main_effects); }

std::vector<FitDiagnostics> FittedNuisance::diagnostics() const {
  return {mu_y[0]->diagnostics(), mu_y[1]->diagnostics(), mu_d[0]->diagnostics(),
          mu_d[1]->diagnostics(), e->diagnostics()};
}

bool FittedNuisance::all_converged() const {
  const auto diags = diagnostics();
  return std::all_of(diags.begin(), diags.end(),
                     [](const FitDiagnostics& d) { return d.converged; });
}

std::array<std::shared_ptr<const ConditionalMean>, 2> fit_arm_regressions(
    const ObservedDataset& data, std::span<const double> response, const RegressionSpec& spec,
    const std::string& label) {
  const Family family = resolve_family(spec.family, response);
  std::array<std::shared_ptr<const ConditionalMean>, 2> out;
  for (int z = 0; z < 2; ++z) {
    const auto rows = rows_in_arm(data, z);
    out[z] = fit_conditional_mean(data, response, rows, spec, family,
                                  label + "(z=" + std::to_string(z) + ")");
  }
  return out;
}

FittedNuisance fit_nuisance(const ObservedDataset& data, const NuisanceSpecs& specs) {
  specs.outcome.validate();
  require_probability_model(specs.treatment, "treatment");
  require_probability_model(specs.instrument, "instrument");

  FittedNuisance n;
  n.specs = specs;
  n.outcome_family = resolve_family(specs.outcome.family, data.outcomes());
  if (specs.outcome.design == DesignKind::saturated) n.outcome_family = Family::linear;

  n.mu_y = fit_arm_regressions(data, data.outcomes(), specs.outcome, "mu_y");

  std::vector<double> d(data.size()), z(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    d[i] = data.d(i);
    z[i] = data.z(i);
  }
  n.mu_d = fit_arm_regressions(data, d, specs.treatment, "mu_d");
  const auto all = rows_in_arm(data, -1);
  n.e = fit_conditional_mean(data, z, all, specs.instrument,
                             resolve_family(specs.instrument.family, z), "e");
  return n;
}

}  // namespace sivwate
