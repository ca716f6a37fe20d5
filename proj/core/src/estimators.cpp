#include "sivwate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "estimators";

void check_denominator(double mean_gap, const EstimatorOptions& options, std::string_view what) {
  if (!(std::abs(mean_gap) >= options.weak_iv_threshold))
    throw_weak_instrument(kOrigin, what, mean_gap);
}

std::vector<double> gaps(const ObservedDataset& data,
                         const std::array<std::shared_ptr<const ConditionalMean>, 2>& arms) {
  auto hi = arms[1]->predict_rows(data);
  const auto lo = arms[0]->predict_rows(data);
  for (std::size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
  return hi;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double e : v) s += e;
  return s;
}

void note_convergence(const FittedNuisance& nuisance, EstimateReport& r) {
  for (const auto& d : nuisance.diagnostics()) {
    if (!d.converged) r.notes.push_back("warning: " + d.model + " did not converge");
    if (d.separation) r.notes.push_back("warning: " + d.model + " separation; ridge applied");
  }
}

}  // namespace

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::wald: return "wald";
    case Estimand::sivwate_regression: return "sivwate-regression";
    case Estimand::sivwate_weighting: return "sivwate-weighting";
    case Estimand::q_mean_treated: return "q-mean-treated";
    case Estimand::q_mean_untreated: return "q-mean-untreated";
    case Estimand::subgroup_sivwate: return "subgroup-sivwate";
    case Estimand::weighted_covariate_mean: return "weighted-covariate-mean";
  }
  return "?";
}

EstimateReport estimate_wald(const ObservedDataset& data, const EstimatorOptions& options) {
  double y_sum[2] = {0, 0}, d_sum[2] = {0, 0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int z = data.z(i);
    y_sum[z] += data.y(i);
    d_sum[z] += data.d(i);
    ++count[z];
  }
  if (count[0] == 0 || count[1] == 0)
    throw Error(ErrorKind::validation, kOrigin, "Wald estimator needs both instrument arms");
  const double den = d_sum[1] / static_cast<double>(count[1]) -
                     d_sum[0] / static_cast<double>(count[0]);
  check_denominator(den, options, "P(D=1|Z=1) - P(D=1|Z=0)");
  const double num = y_sum[1] / static_cast<double>(count[1]) -
                     y_sum[0] / static_cast<double>(count[0]);
  EstimateReport r;
  r.estimand = Estimand::wald;
  r.point = num / den;
  r.denominator = den;
  r.n = data.size();
  return r;
}

UnitGaps unit_gaps(const ObservedDataset& data, const FittedNuisance& nuisance) {
  return {gaps(data, nuisance.mu_y), gaps(data, nuisance.mu_d)};
}

EstimateReport estimate_sivwate_regression(const ObservedDataset& data,
                                           const FittedNuisance& nuisance,
                                           const EstimatorOptions& options) {
  const auto g = unit_gaps(data, nuisance);
  const double n = static_cast<double>(data.size());
  const double den = sum(g.treatment);
  check_denominator(den / n, options, "mean fitted treatment-rate gap");
  EstimateReport r;
  r.estimand = Estimand::sivwate_regression;
  r.point = sum(g.outcome) / den;
  r.denominator = den / n;
  r.n = data.size();
  note_convergence(nuisance, r);
  return r;
}

EstimateReport estimate_q_mean(const ObservedDataset& data, const FittedNuisance& nuisance,
                               const OutcomeTransform& g, Arm arm,
                               const EstimatorOptions& options) {
  std::vector<double> response(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double gy = g(data.y(i));
    switch (arm) {
      case Arm::treated: response[i] = data.d(i) * gy; break;
      case Arm::untreated: response[i] = (1 - data.d(i)) * gy; break;
      case Arm::difference: response[i] = gy; break;
    }
  }
  const std::string label = arm == Arm::treated     ? "m_dg"
                            : arm == Arm::untreated ? "m_1mdg"
                                                    : "m_g";
  const auto fits = fit_arm_regressions(data, response, nuisance.specs.outcome, label);
  const double num = sum(gaps(data, fits));
  const double den = sum(gaps(data, nuisance.mu_d));
  const double n = static_cast<double>(data.size());
  check_denominator(den / n, options, "mean fitted treatment-rate gap");

  EstimateReport r;
  r.estimand = arm == Arm::untreated ? Estimand::q_mean_untreated
               : arm == Arm::treated ? Estimand::q_mean_treated
                                     : Estimand::sivwate_regression;
  r.point = (arm == Arm::untreated ? -1.0 : 1.0) * num / den;
  r.denominator = den / n;
  r.n = data.size();
  r.notes.push_back("g = " + g.name());
  for (const auto& f : fits)
    if (!f->diagnostics().converged) r.notes.push_back("warning: " + f->diagnostics().model + " did not converge");
  note_convergence(nuisance, r);
  return r;
}

EstimateReport estimate_sivwate_weighting(const ObservedDataset& data,
                                          const ConditionalMean& propensity,
                                          const OutcomeTransform& g,
                                          const EstimatorOptions& options, Arm arm) {
  auto e = propensity.predict_rows(data);
  const double lo = options.propensity_clamp, hi = 1.0 - options.propensity_clamp;
  std::size_t clamped = 0;
  for (double& v : e) {
    if (v < lo || v > hi) {
      ++clamped;
      v = std::clamp(v, lo, hi);
    }
  }
  const double n = static_cast<double>(data.size());
  const double share = static_cast<double>(clamped) / n;
  if (share > options.max_clamped_fraction) {
    std::ostringstream s;
    s << "instrument propensity clamped on " << clamped << " of " << data.size()
      << " rows (limit " << options.max_clamped_fraction * 100 << "%)";
    throw Error(ErrorKind::positivity, kOrigin, s.str()).with_value(share);
  }

  double num = 0, den = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double kappa = (data.z(i) - e[i]) / (e[i] * (1.0 - e[i]));
    const double gy = g(data.y(i));
    double f = gy;
    if (arm == Arm::treated) f = data.d(i) * gy;
    if (arm == Arm::untreated) f = (1 - data.d(i)) * gy;
    num += kappa * f;
    den += kappa * data.d(i);
  }
  check_denominator(den / n, options, "mean kappa * D");

  EstimateReport r;
  r.estimand = arm == Arm::treated     ? Estimand::q_mean_treated
               : arm == Arm::untreated ? Estimand::q_mean_untreated
                                       : Estimand::sivwate_weighting;
  r.point = (arm == Arm::untreated ? -1.0 : 1.0) * num / den;
  r.denominator = den / n;
  r.n = data.size();
  r.clamped_rows = clamped;
  if (clamped > 0) r.notes.push_back("propensity clamped on " + std::to_string(clamped) + " rows");
  if (g.tag() != OutcomeTransform::Tag::identity) r.notes.push_back("g = " + g.name());
  return r;
}

std::vector<SubgroupEstimate> estimate_subgroup_sivwate(const ObservedDataset& data,
                                                        const FittedNuisance& nuisance,
                                                        const Stratifier& v,
                                                        const EstimatorOptions& options,
                                                        SubgroupFit fit) {
  std::vector<std::vector<std::size_t>> members(v.levels());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t level = v.level_of(data.x(i));
    if (level >= v.levels())
      throw Error(ErrorKind::validation, kOrigin,
                  "subgroup function '" + v.name + "' returned an out-of-range level");
    members[level].push_back(i);
  }

  std::optional<UnitGaps> shared;
  if (fit == SubgroupFit::shared) shared = unit_gaps(data, nuisance);

  std::vector<SubgroupEstimate> out;
  for (std::size_t level = 0; level < v.levels(); ++level) {
    SubgroupEstimate s;
    s.level = v.level_names[level];
    const auto& rows = members[level];
    s.rows = rows.size();
    try {
      if (rows.empty())
        throw Error(ErrorKind::validation, kOrigin, "subgroup '" + s.level + "' has no rows");
      std::size_t arm_rows[2] = {0, 0};
      for (auto i : rows) ++arm_rows[data.z(i)];
      if (arm_rows[0] == 0 || arm_rows[1] == 0)
        throw Error(ErrorKind::validation, kOrigin,
                    "subgroup '" + s.level + "' lacks rows in one instrument arm");
      EstimateReport r;
      if (fit == SubgroupFit::shared) {
        double num = 0, den = 0;
        for (auto i : rows) {
          num += shared->outcome[i];
          den += shared->treatment[i];
        }
        const double nl = static_cast<double>(rows.size());
        check_denominator(den / nl, options, "subgroup '" + s.level + "' treatment-rate gap");
        r.point = num / den;
        r.denominator = den / nl;
        r.n = rows.size();
        note_convergence(nuisance, r);
      } else {
        const auto sub = data.subset(rows);
        const auto local = fit_nuisance(sub, nuisance.specs);
        r = estimate_sivwate_regression(sub, local, options);
        r.notes.push_back("nuisance refit within subgroup");
      }
      r.estimand = Estimand::subgroup_sivwate;
      s.report = std::move(r);
    } catch (const Error& e) {
      s.error = e.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ProfileRow> weighted_covariate_profile(const ObservedDataset& data,
                                                   const FittedNuisance& nuisance,
                                                   const std::vector<CovariateFunction>& v_list,
                                                   const EstimatorOptions& options) {
  const auto gap = gaps(data, nuisance.mu_d);
  const double den = sum(gap);
  const double n = static_cast<double>(data.size());
  check_denominator(den / n, options, "mean fitted treatment-rate gap");
  std::vector<ProfileRow> out;
  for (const auto& v : v_list) {
    double weighted = 0, plain = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double vi = v.value(data.x(i));
      weighted += vi * gap[i];
      plain += vi;
    }
    ProfileRow row;
    row.name = v.name;
    row.weighted = weighted / den;
    row.unweighted = plain / n;
    row.ratio = row.unweighted != 0 ? row.weighted / row.unweighted
                                    : std::numeric_limits<double>::quiet_NaN();
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace sivwate
