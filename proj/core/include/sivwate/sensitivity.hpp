#pragma once

#include <optional>

#include "sivwate/dgp.hpp"

namespace sivwate {

// lambda = |E[w 1{w < 0}]| / E[w]. The numerator is a user assumption; the
// denominator is the IV strength. Throws weak_instrument for denominator <= 0.
double lambda_value(double numerator, double denominator);

struct SensitivityInputs {
  double naive_estimate = 0;
  double defier_weight_numerator = 0;    // >= 0
  double iv_strength_denominator = 1;    // > 0
  double effect_gap_bound = 0;           // bound on |NSIVWATE - PSIVWATE|, >= 0

  void validate() const;
};

struct SensitivityResult {
  double lambda = 0;
  double naive = 0;
  double lower = 0;
  double upper = 0;
};

// Range of the effect over the non-negative-weight strata consistent with
// the stated defier mass and effect gap: naive -/+ lambda * effect_gap_bound.
SensitivityResult psivwate_interval(const SensitivityInputs& inputs);

struct BiasCheck {
  double residual = 0;
  double lambda = 0;
  double naive = 0;
  double psivwate = 0;
  std::optional<double> nsivwate;
};

// Exact check of naive - psivwate + lambda (nsivwate - psivwate) = 0 on a
// finite DGP. An empty negative-weight set contributes zero.
BiasCheck population_bias_check(const LatentDgp& dgp);

}  // namespace sivwate
