#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sivwate/dataset.hpp"

namespace sivwate {

enum class Family { automatic, logistic, linear };
enum class DesignKind { intercept_only, main_effects, saturated, formula };

struct FitControls {
  int max_iterations = 100;
  double tolerance = 1e-8;
  double ridge = 0.0;
};

struct RegressionSpec {
  Family family = Family::automatic;
  DesignKind design = DesignKind::main_effects;
  // For DesignKind::formula: each term is a product of covariates, e.g.
  // {{"age"}, {"age", "sex"}} for "age + age:sex". Intercept always included.
  std::vector<std::vector<std::string>> terms;
  FitControls controls;

  void validate() const;
};

// "a + b + a:b" -> {{"a"}, {"b"}, {"a", "b"}}
std::vector<std::vector<std::string>> parse_formula(const std::string& formula);

std::string to_string(Family f);
std::string to_string(DesignKind d);

// Expands covariate vectors into regression columns. Categorical covariates
// are one-hot coded with the first level as reference.
class Design {
 public:
  Design(const CovariateSchema& schema, const RegressionSpec& spec);

  std::size_t columns() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  void fill_row(std::span<const double> x, std::span<double> out) const;
  Eigen::MatrixXd matrix(const ObservedDataset& data, std::span<const std::size_t> rows) const;

 private:
  struct Factor {
    std::size_t covariate;
    bool categorical;
    std::size_t level;  // indicator level for categorical factors
  };
  std::vector<std::vector<Factor>> columns_;  // product of factors per column
  std::vector<std::string> names_;
};

struct GlmFit {
  Family family = Family::linear;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;  // from the (penalized) observed information
  int iterations = 0;
  bool converged = false;
  bool separation = false;
  double ridge = 0.0;
  double log_likelihood = 0.0;  // penalized; logistic only
  std::vector<double> trace;    // penalized log-likelihood after each Newton step
};

// Logistic: Newton iterations with step halving on the ridge-penalized
// log-likelihood; stops when the largest coefficient change is below
// tolerance. Divergence with ridge 0 is flagged as separation and refit with
// ridge 1e-6. Linear: closed-form (ridge) least squares.
GlmFit fit_binary_regression(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             Family family, const FitControls& controls);

Family resolve_family(Family requested, std::span<const double> response);

struct FitDiagnostics {
  std::string model;
  std::string method;  // "logistic", "linear", "cell-means" or "sample-mean"
  std::size_t rows = 0;
  int iterations = 0;
  bool converged = true;
  bool separation = false;
  double ridge = 0.0;
  std::size_t cells = 0;        // saturated fits: non-empty cells
  std::size_t empty_cells = 0;  // saturated fits: cells of the data with no rows
};

// A fitted conditional mean x -> E[response | x].
class ConditionalMean {
 public:
  virtual ~ConditionalMean() = default;
  virtual double predict(std::span<const double> x) const = 0;
  // Predictions at every row of `data`.
  virtual std::vector<double> predict_rows(const ObservedDataset& data) const;
  virtual const FitDiagnostics& diagnostics() const noexcept = 0;
};

class GlmPredictor final : public ConditionalMean {
 public:
  GlmPredictor(Design design, GlmFit fit, FitDiagnostics diag);
  double predict(std::span<const double> x) const override;
  const FitDiagnostics& diagnostics() const noexcept override { return diag_; }
  const GlmFit& fit() const noexcept { return fit_; }

 private:
  Design design_;
  GlmFit fit_;
  FitDiagnostics diag_;
};

// Within-cell sample means over the distinct covariate vectors of a dataset.
class CellMeans final : public ConditionalMean {
 public:
  CellMeans(std::shared_ptr<const CellTable> cells, std::vector<double> sums,
            std::vector<std::size_t> counts, FitDiagnostics diag);
  // Throws empty_cell when x has no training rows.
  double predict(std::span<const double> x) const override;
  std::vector<double> predict_rows(const ObservedDataset& data) const override;
  const FitDiagnostics& diagnostics() const noexcept override { return diag_; }
  std::size_t count(std::span<const double> x) const;

 private:
  std::size_t locate(std::span<const double> x) const;
  [[noreturn]] void empty(std::span<const double> x) const;

  std::shared_ptr<const CellTable> cells_;
  std::vector<double> means_;
  std::vector<std::size_t> counts_;
  FitDiagnostics diag_;
};

// Rows of `data` whose instrument equals `arm`, or all rows when arm < 0.
std::vector<std::size_t> rows_in_arm(const ObservedDataset& data, int arm);

CellMeans fit_cell_means(const ObservedDataset& data, std::span<const double> response,
                         std::span<const std::size_t> rows, std::string model = "cell-means");

// Fits `spec` to response over the given rows (saturated designs use cell means).
std::shared_ptr<const ConditionalMean> fit_conditional_mean(const ObservedDataset& data,
                                                            std::span<const double> response,
                                                            std::span<const std::size_t> rows,
                                                            const RegressionSpec& spec,
                                                            Family resolved_family,
                                                            std::string model);

}  // namespace sivwate
