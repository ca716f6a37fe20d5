#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sivwate/dgp.hpp"

namespace sivwate {

// Compliance classes in the order used for U by make_dcc_dgp.
enum class ComplianceClass : std::size_t { never = 0, always = 1, complier = 2, defier = 3 };

// Deterministic-compliance process: U is the compliance class.
struct DccSpec {
  CovariateSchema schema;
  std::vector<std::vector<double>> x_support;
  std::vector<double> p_x;
  std::vector<double> e_z;
  std::vector<std::array<double, 4>> class_mix;  // per x: (never, always, complier, defier)
  std::vector<double> y_support;
  // [d][x][class] -> law of Y(d) over y_support
  std::array<std::vector<std::array<std::vector<double>, 4>>, 2> law_y;
};

LatentDgp make_dcc_dgp(const DccSpec& spec);

enum class BoundSide { lower, upper };

// Two-point confounder per x reaching one endpoint of the conditional ATE
// bound: U = 1 are compliers (w = 1) with effect `sivwate_x`; U = 0 have
// w = 0 and effect sivwate_x -/+ r. P(U = 1 | x) = compliance_share_x.
struct BoundAttainingSpec {
  CovariateSchema schema;
  std::vector<std::vector<double>> x_support;
  std::vector<double> p_x;
  std::vector<double> sivwate_x;
  std::vector<double> compliance_share_x;
  double r = 0;
  BoundSide side = BoundSide::lower;
  std::vector<double> e_z;  // defaults to 0.5 everywhere when empty
};

LatentDgp make_bound_attaining_dgp(const BoundAttainingSpec& spec);

struct DgpSizes {
  std::size_t x = 1;
  std::size_t u = 1;
  std::size_t y = 2;
};

enum class Monotonicity {
  any,      // no constraint beyond E[w] >= floor
  enforce,  // w(x, u) >= 0 everywhere
  violate,  // some positive-mass stratum with w(x, u) < 0
};

struct RandomDgpOptions {
  DgpSizes sizes;
  std::uint64_t seed = 0;
  Monotonicity monotonicity = Monotonicity::enforce;
  double min_iv_strength = 0.05;
  bool positive_effects = false;  // every stratum effect E[Y(1) - Y(0) | x, u] > 0
  std::size_t max_attempts = 10000;
};

// Random finite DGP with one continuous covariate "x" taking values 0..|X|-1.
// Rejection-samples until the constraints hold; throws a generation error
// after max_attempts.
LatentDgp random_dgp(const RandomDgpOptions& options);
LatentDgp random_dgp(DgpSizes sizes, std::uint64_t seed, bool enforce_monotonicity);

// Random deterministic-compliance process over x = 0..nx-1 with outcome
// support of size ny. Class shares are drawn per x; with defiers = false the
// defier share is zero; otherwise compliers outnumber defiers in every x.
LatentDgp random_dcc_dgp(std::uint64_t seed, std::size_t nx, std::size_t ny, bool defiers);

// Merges U into a single stratum per x. Only valid (and only allowed) when the
// outcome laws do not vary with u inside each x.
LatentDgp collapse_confounder(const LatentDgp& dgp);

}  // namespace sivwate
