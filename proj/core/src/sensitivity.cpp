#include "sivwate/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "sensitivity";

void require(bool ok, const std::string& what, double value) {
  if (!ok) {
    std::ostringstream s;
    s << what << " (got " << value << ")";
    throw Error(ErrorKind::validation, kOrigin, s.str()).with_value(value);
  }
}

}  // namespace

double lambda_value(double numerator, double denominator) {
  if (!(denominator > 0.0))
    throw_weak_instrument(kOrigin, "lambda denominator E[w]", denominator);
  require(std::isfinite(numerator) && numerator >= 0.0,
          "negative-weight mass must be a finite non-negative number", numerator);
  require(std::isfinite(denominator), "lambda denominator must be finite", denominator);
  return numerator / denominator;
}

void SensitivityInputs::validate() const {
  require(std::isfinite(naive_estimate), "naive estimate must be finite", naive_estimate);
  require(std::isfinite(effect_gap_bound) && effect_gap_bound >= 0.0,
          "effect gap bound must be finite and non-negative", effect_gap_bound);
}

SensitivityResult psivwate_interval(const SensitivityInputs& in) {
  in.validate();
  SensitivityResult r;
  r.lambda = lambda_value(in.defier_weight_numerator, in.iv_strength_denominator);
  r.naive = in.naive_estimate;
  const double a = in.naive_estimate - r.lambda * in.effect_gap_bound;
  const double b = in.naive_estimate + r.lambda * in.effect_gap_bound;
  r.lower = std::min(a, b);
  r.upper = std::max(a, b);
  return r;
}

BiasCheck population_bias_check(const LatentDgp& dgp) {
  const auto truth = population_truth(dgp);
  BiasCheck c;
  c.lambda = truth.lambda;
  c.naive = truth.naive_estimand;
  c.psivwate = truth.psivwate;
  c.nsivwate = truth.nsivwate;
  const double gap = truth.nsivwate ? *truth.nsivwate - truth.psivwate : 0.0;
  c.residual = (truth.naive_estimand - truth.psivwate) + truth.lambda * gap;
  return c;
}

}  // namespace sivwate
