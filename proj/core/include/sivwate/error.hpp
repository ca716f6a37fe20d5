#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sivwate {

enum class ErrorKind {
  schema,
  validation,
  parse,
  io,
  config,
  weak_instrument,
  positivity,
  empty_cell,
  undefined_estimand,
  unstable_bootstrap,
  generation,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library. `origin` names the module that
// raised it (e.g. "core_data", "estimators"); the CLI echoes it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string origin, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& origin() const noexcept { return origin_; }

  // 1-based data row for ingestion errors.
  std::optional<std::size_t> row() const noexcept { return row_; }
  // The offending quantity, e.g. the IV-strength denominator.
  std::optional<double> value() const noexcept { return value_; }

  Error& with_row(std::size_t row);
  Error& with_value(double value);

 private:
  ErrorKind kind_;
  std::string origin_;
  std::optional<std::size_t> row_;
  std::optional<double> value_;
};

// Absolute threshold below which an IV-strength denominator is treated as zero.
inline constexpr double kDefaultWeakIvThreshold = 1e-9;

[[noreturn]] void throw_weak_instrument(std::string origin, std::string_view what,
                                        double denominator);

}  // namespace sivwate
