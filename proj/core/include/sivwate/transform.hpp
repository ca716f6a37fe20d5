#pragma once

#include <functional>
#include <string>

namespace sivwate {

// Pointwise outcome map g applied before averaging under the weighted law.
class OutcomeTransform {
 public:
  enum class Tag { identity, indicator, user };

  static OutcomeTransform identity();
  // 1{y > threshold}
  static OutcomeTransform indicator(double threshold);
  static OutcomeTransform user(std::string name, std::function<double(double)> fn);

  Tag tag() const noexcept { return tag_; }
  double threshold() const noexcept { return threshold_; }
  const std::string& name() const noexcept { return name_; }

  double operator()(double y) const;

 private:
  OutcomeTransform(Tag tag, double threshold, std::string name,
                   std::function<double(double)> fn);

  Tag tag_;
  double threshold_;
  std::string name_;
  std::function<double(double)> fn_;
};

inline double apply_transform(const OutcomeTransform& g, double y) { return g(y); }

}  // namespace sivwate

namespace sivwate {

// Which potential-outcome mean under the weighted law: E_Q[g(Y(1))],
// E_Q[g(Y(0))], or their difference.
enum class Arm { treated, untreated, difference };

}  // namespace sivwate
