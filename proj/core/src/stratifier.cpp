#include "sivwate/stratifier.hpp"

#include <algorithm>
#include <sstream>

#include "sivwate/error.hpp"

namespace sivwate {

Stratifier Stratifier::by_covariate(const CovariateSchema& schema, const std::string& covariate) {
  const std::size_t j = schema.index_of(covariate);
  if (schema[j].kind != CovariateKind::categorical)
    throw Error(ErrorKind::config, "core_data",
                "covariate '" + covariate + "' is continuous; give cutpoints to stratify it");
  Stratifier s;
  s.name = covariate;
  s.level_names = schema[j].levels;
  s.level_of = [j](std::span<const double> x) { return static_cast<std::size_t>(x[j]); };
  return s;
}

Stratifier Stratifier::by_cutpoints(const CovariateSchema& schema, const std::string& covariate,
                                    std::vector<double> cutpoints) {
  const std::size_t j = schema.index_of(covariate);
  if (cutpoints.empty())
    throw Error(ErrorKind::config, "core_data", "cutpoints for '" + covariate + "' are empty");
  if (!std::is_sorted(cutpoints.begin(), cutpoints.end()) ||
      std::adjacent_find(cutpoints.begin(), cutpoints.end()) != cutpoints.end())
    throw Error(ErrorKind::config, "core_data",
                "cutpoints for '" + covariate + "' must be strictly increasing");
  Stratifier s;
  s.name = covariate;
  for (std::size_t k = 0; k <= cutpoints.size(); ++k) {
    std::ostringstream label;
    if (k == 0)
      label << covariate << " < " << cutpoints[0];
    else if (k == cutpoints.size())
      label << covariate << " >= " << cutpoints[k - 1];
    else
      label << cutpoints[k - 1] << " <= " << covariate << " < " << cutpoints[k];
    s.level_names.push_back(label.str());
  }
  s.level_of = [j, cuts = std::move(cutpoints)](std::span<const double> x) {
    return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x[j]) -
                                    cuts.begin());
  };
  return s;
}

Stratifier Stratifier::constant() {
  Stratifier s;
  s.name = "all";
  s.level_names = {"All"};
  s.level_of = [](std::span<const double>) { return std::size_t{0}; };
  return s;
}

CovariateFunction CovariateFunction::covariate(const CovariateSchema& schema,
                                               const std::string& name) {
  const std::size_t j = schema.index_of(name);
  return {name, [j](std::span<const double> x) { return x[j]; }};
}

CovariateFunction CovariateFunction::level_indicator(const Stratifier& v, std::size_t level) {
  if (level >= v.levels())
    throw Error(ErrorKind::config, "core_data", "level index out of range for '" + v.name + "'");
  return {v.level_names[level], [f = v.level_of, level](std::span<const double> x) {
            return f(x) == level ? 1.0 : 0.0;
          }};
}

CovariateFunction CovariateFunction::constant_one() {
  return {"(constant)", [](std::span<const double>) { return 1.0; }};
}

std::vector<CovariateFunction> default_profile(const CovariateSchema& schema) {
  std::vector<CovariateFunction> out;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& c = schema[j];
    if (c.kind == CovariateKind::continuous) {
      out.push_back(CovariateFunction::covariate(schema, c.name));
    } else {
      for (std::size_t k = 0; k < c.levels.size(); ++k)
        out.push_back({c.name + "=" + c.levels[k], [j, k](std::span<const double> x) {
                         return x[j] == static_cast<double>(k) ? 1.0 : 0.0;
                       }});
    }
  }
  return out;
}

}  // namespace sivwate
