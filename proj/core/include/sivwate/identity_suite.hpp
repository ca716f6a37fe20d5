#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sivwate/dgp.hpp"

namespace sivwate {

// Largest residual of one population identity over a set of DGPs. Cases
// where the identity is undefined (e.g. no IV strength) are counted as skipped.
struct IdentityRow {
  std::string identity;
  std::size_t cases = 0;
  std::size_t skipped = 0;
  double max_residual = 0;
  double tolerance = 1e-10;

  bool passed() const noexcept { return max_residual <= tolerance; }
};

struct IdentitySummary {
  std::string group;
  std::size_t dgps = 0;
  double max_lambda = 0;
  std::vector<IdentityRow> rows;

  bool passed() const noexcept;
};

// Identities checked:
//   regression-form   regression-form right-hand sides vs. direct weighted-law means
//   weighting-form    kappa-weighting right-hand sides vs. regression form
//   subgroup          level-conditional form and weighted covariate means
//   bounds            conditional ATE inside its range bound (monotone DGPs only)
//   bias              naive - psivwate + lambda (nsivwate - psivwate)
//   lambda            lambda vs. direct negative-weight mass
IdentitySummary check_identities(const std::string& group, const std::vector<LatentDgp>& dgps,
                                 double tolerance = 1e-10);

// Random monotone, random violating and deterministic-compliance groups.
std::vector<IdentitySummary> builtin_identity_suite(std::size_t per_group = 100,
                                                    std::uint64_t seed = 20240601);

}  // namespace sivwate
