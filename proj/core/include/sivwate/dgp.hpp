#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sivwate/dataset.hpp"
#include "sivwate/stratifier.hpp"
#include "sivwate/transform.hpp"

namespace sivwate {

// Dense row-major table of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

// Raw probability tables of a finite latent data-generating process over
// (X, U, Z, D, Y(0), Y(1)). Z depends on X only; D on (Z, X, U); Y(d) on (X, U).
struct DgpTables {
  CovariateSchema schema;
  std::vector<std::vector<double>> x_support;  // [x] -> covariate vector
  std::vector<std::string> u_support;          // confounder labels
  Matrix p_xu;                                 // joint P(X = x, U = u)
  std::vector<double> e_z;                     // P(Z = 1 | x)
  std::array<Matrix, 2> p_d;                   // [z](x, u) -> P(D = 1 | z, x, u)
  std::vector<double> y_support;               // common finite outcome support
  // [d][x][u] -> distribution of Y(d) given (x, u) over y_support
  std::array<std::vector<std::vector<std::vector<double>>>, 2> law_y;
};

// Validated, immutable latent DGP. Construction throws a validation error
// naming the offending table entry.
class LatentDgp {
 public:
  explicit LatentDgp(DgpTables tables);

  const DgpTables& tables() const noexcept { return t_; }
  const CovariateSchema& schema() const noexcept { return t_.schema; }

  std::size_t x_count() const noexcept { return t_.x_support.size(); }
  std::size_t u_count() const noexcept { return t_.u_support.size(); }
  std::size_t y_count() const noexcept { return t_.y_support.size(); }

  std::span<const double> x_value(std::size_t x) const { return t_.x_support[x]; }
  double p_xu(std::size_t x, std::size_t u) const { return t_.p_xu(x, u); }
  double p_x(std::size_t x) const { return p_x_[x]; }
  // P(U = u | X = x); zero when x has no mass.
  double p_u_given_x(std::size_t x, std::size_t u) const;
  double e_z(std::size_t x) const { return t_.e_z[x]; }
  double p_d(int z, std::size_t x, std::size_t u) const { return t_.p_d[z](x, u); }
  std::span<const double> law_y(int d, std::size_t x, std::size_t u) const {
    return t_.law_y[d][x][u];
  }
  double y_value(std::size_t k) const { return t_.y_support[k]; }

  // w(x, u) = P(D=1 | Z=1, x, u) - P(D=1 | Z=0, x, u)
  double weight(std::size_t x, std::size_t u) const { return p_d(1, x, u) - p_d(0, x, u); }
  // E[g(Y(d)) | x, u]
  double potential_mean(int d, std::size_t x, std::size_t u, const OutcomeTransform& g) const;
  // E[Y(1) - Y(0) | x, u]
  double stratum_effect(std::size_t x, std::size_t u) const;

 private:
  DgpTables t_;
  std::vector<double> p_x_;
};

struct AssumptionReport {
  bool iva2 = false;  // instrument shifts treatment in at least one x stratum
  bool iva4 = false;  // stochastic monotonicity in every positive-mass (x, u) stratum
  std::vector<std::pair<std::size_t, std::size_t>> violations;  // positive-mass (x, u) with w < 0
};

AssumptionReport validate_dgp(const LatentDgp& dgp);

// w(x, u) for every stratum.
Matrix weight_table(const LatentDgp& dgp);

struct PopulationTruth {
  Matrix weight_table;
  double sivwate = 0;
  double psivwate = 0;
  std::optional<double> nsivwate;  // absent when every weight is non-negative
  double lambda = 0;
  double iv_strength = 0;     // E[w(X, U)]
  double naive_estimand = 0;  // observable-law ratio with g = identity
  std::vector<std::pair<std::size_t, std::size_t>> positive_set;  // strata with w >= 0
};

// Throws weak_instrument when E[w] <= 1e-9.
PopulationTruth population_truth(const LatentDgp& dgp);

// Observable law P(D, Y | Z, X) obtained by integrating U out. All
// "identified" quantities below are computed from this alone.
class ObservableLaw {
 public:
  explicit ObservableLaw(const LatentDgp& dgp);

  std::size_t x_count() const noexcept { return p_x_.size(); }
  std::size_t y_count() const noexcept { return y_support_.size(); }
  double p_x(std::size_t x) const { return p_x_[x]; }
  double e_z(std::size_t x) const { return e_z_[x]; }
  double y_value(std::size_t k) const { return y_support_[k]; }
  // P(D = d, Y = y_k | Z = z, X = x)
  double p_dy(int z, std::size_t x, int d, std::size_t k) const;
  // P(D = 1 | Z = z, X = x)
  double treatment_rate(int z, std::size_t x) const;
  // P(Z = z, D = d, Y = y_k, X = x)
  double joint(std::size_t x, int z, int d, std::size_t k) const;

 private:
  std::vector<double> p_x_;
  std::vector<double> e_z_;
  std::vector<double> y_support_;
  std::vector<double> p_dy_;  // [z][x][d][k]
};

// Right-hand sides of the regression-form identification formulas.
double population_rhs_prop1(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm);
// Right-hand sides of the instrument-propensity (kappa) weighting formulas.
// Throws positivity when some x with mass has e(x) in {0, 1}.
double population_rhs_prop2(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm);
// Subgroup form: ratio of level-conditional outcome and treatment gaps.
double population_rhs_subgroup(const LatentDgp& dgp, const OutcomeTransform& g,
                               const Stratifier& v, std::size_t level);
// E_Q[V] from the observable law.
double population_weighted_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v);
// E[V] over the population.
double population_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v);

// Direct weighted-law expectations from the latent tables (left-hand sides).
double weighted_potential_mean(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm);
double weighted_potential_mean_given(const LatentDgp& dgp, const OutcomeTransform& g, Arm arm,
                                     const Stratifier& v, std::size_t level);
double weighted_covariate_mean(const LatentDgp& dgp, const CovariateFunction& v);

// Per-x truth used by the bounds checks.
struct ConditionalTruth {
  double p_x = 0;
  double ate = 0;                 // E[Y(1) - Y(0) | x]
  double compliance_gap = 0;      // E[w | x] from the latent tables
  double observable_gap = 0;      // P(D=1|Z=1,x) - P(D=1|Z=0,x)
  std::optional<double> sivwate;  // E_Q[Y(1) - Y(0) | x]; absent when E[w|x] ~ 0
  double effect_min = 0;          // over u with positive mass
  double effect_max = 0;
};

std::vector<ConditionalTruth> conditional_truth(const LatentDgp& dgp);
double global_ate(const LatentDgp& dgp);

// n i.i.d. draws of (x, z, d, y); U is discarded. Deterministic in seed.
ObservedDataset sample_dataset(const LatentDgp& dgp, std::size_t n, std::uint64_t seed);

// Dataset of size n whose empirical law equals the observable law exactly.
// Requires every P(x, z, d, y) * n to be an integer (within 1e-6).
ObservedDataset expand_population(const LatentDgp& dgp, std::size_t n);

}  // namespace sivwate
