#include "sivwate/error.hpp"

#include <sstream>

namespace sivwate {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::schema: return "schema";
    case ErrorKind::validation: return "validation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::weak_instrument: return "weak_instrument";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::empty_cell: return "empty_cell";
    case ErrorKind::undefined_estimand: return "undefined_estimand";
    case ErrorKind::unstable_bootstrap: return "unstable_bootstrap";
    case ErrorKind::generation: return "generation";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string origin, const std::string& message)
    : std::runtime_error(message), kind_(kind), origin_(std::move(origin)) {}

Error& Error::with_row(std::size_t row) {
  row_ = row;
  return *this;
}

Error& Error::with_value(double value) {
  value_ = value;
  return *this;
}

void throw_weak_instrument(std::string origin, std::string_view what, double denominator) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "weak or invalid instrument: " << what << " denominator = " << denominator;
  throw Error(ErrorKind::weak_instrument, std::move(origin), msg.str()).with_value(denominator);
}

}  // namespace sivwate
