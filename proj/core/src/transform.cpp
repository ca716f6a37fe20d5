#include "sivwate/transform.hpp"

#include <sstream>

#include "sivwate/error.hpp"

namespace sivwate {

OutcomeTransform::OutcomeTransform(Tag tag, double threshold, std::string name,
                                   std::function<double(double)> fn)
    : tag_(tag), threshold_(threshold), name_(std::move(name)), fn_(std::move(fn)) {}

OutcomeTransform OutcomeTransform::identity() {
  return OutcomeTransform(Tag::identity, 0.0, "identity", {});
}

OutcomeTransform OutcomeTransform::indicator(double threshold) {
  std::ostringstream name;
  name << "indicator(" << threshold << ")";
  return OutcomeTransform(Tag::indicator, threshold, name.str(), {});
}

OutcomeTransform OutcomeTransform::user(std::string name, std::function<double(double)> fn) {
  if (!fn) throw Error(ErrorKind::config, "core_data", "user transform '" + name + "' is empty");
  return OutcomeTransform(Tag::user, 0.0, std::move(name), std::move(fn));
}

double OutcomeTransform::operator()(double y) const {
  switch (tag_) {
    case Tag::identity: return y;
    case Tag::indicator: return y > threshold_ ? 1.0 : 0.0;
    case Tag::user: return fn_(y);
  }
  return y;
}

}  // namespace sivwate
