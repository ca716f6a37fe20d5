#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/regression.hpp"

namespace sivwate {

struct NuisanceSpecs {
  RegressionSpec outcome;     // mu_y; automatic family: logistic for 0/1 outcomes, else linear
  RegressionSpec treatment;   // mu_d; logistic
  RegressionSpec instrument;  // e; logistic

  static NuisanceSpecs saturated();
  static NuisanceSpecs intercept_only();
  static NuisanceSpecs main_effects();
};

// mu_y(z, x) = E(Y | Z=z, X=x), mu_d(z, x) = P(D=1 | Z=z, X=x), e(x) = P(Z=1 | X=x).
// mu_y and mu_d are fit separately within each instrument arm.
struct FittedNuisance {
  std::array<std::shared_ptr<const ConditionalMean>, 2> mu_y;
  std::array<std::shared_ptr<const ConditionalMean>, 2> mu_d;
  std::shared_ptr<const ConditionalMean> e;
  NuisanceSpecs specs;
  Family outcome_family = Family::linear;  // resolved family used for mu_y

  double outcome_mean(int z, std::span<const double> x) const { return mu_y[z]->predict(x); }
  double treatment_rate(int z, std::span<const double> x) const { return mu_d[z]->predict(x); }
  double propensity(std::span<const double> x) const { return e->predict(x); }

  std::vector<FitDiagnostics> diagnostics() const;
  bool all_converged() const;
};

FittedNuisance fit_nuisance(const ObservedDataset& data, const NuisanceSpecs& specs);

// Per-arm fit of an arbitrary response (e.g. D g(Y)) with the outcome model's
// design and family rules; returns {fit on z=0 rows, fit on z=1 rows}.
std::array<std::shared_ptr<const ConditionalMean>, 2> fit_arm_regressions(
    const ObservedDataset& data, std::span<const double> response, const RegressionSpec& spec,
    const std::string& label);

}  // namespace sivwate
