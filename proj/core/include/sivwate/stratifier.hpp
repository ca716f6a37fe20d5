#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sivwate/dataset.hpp"

namespace sivwate {

// A covariate function V(x) with finitely many levels. Used for subgroup
// estimates and for stratified bootstrap resampling.
struct Stratifier {
  std::string name;
  std::vector<std::string> level_names;
  std::function<std::size_t(std::span<const double>)> level_of;

  std::size_t levels() const noexcept { return level_names.size(); }

  // One level per category of a categorical covariate.
  static Stratifier by_covariate(const CovariateSchema& schema, const std::string& covariate);
  // Half-open bins (-inf, c1), [c1, c2), ..., [ck, inf) over a continuous covariate.
  static Stratifier by_cutpoints(const CovariateSchema& schema, const std::string& covariate,
                                 std::vector<double> cutpoints);
  // Single level covering every row.
  static Stratifier constant();
};

// A real-valued covariate function, e.g. an indicator of a category.
struct CovariateFunction {
  std::string name;
  std::function<double(std::span<const double>)> value;

  static CovariateFunction covariate(const CovariateSchema& schema, const std::string& name);
  static CovariateFunction level_indicator(const Stratifier& v, std::size_t level);
  static CovariateFunction constant_one();
};

// Default profile: every continuous covariate plus an indicator per category.
std::vector<CovariateFunction> default_profile(const CovariateSchema& schema);

}  // namespace sivwate
