#include "sivwate/regression.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sivwate/csv.hpp"
#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "nuisance";
constexpr double kSeparationRidge = 1e-6;
constexpr double kSeparationEta = 30.0;

double softplus(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double penalized_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta, double ridge) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll - 0.5 * ridge * beta.squaredNorm();
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::VectorXd s = ldlt.solve(g);
    if (s.allFinite()) return s;
  }
  // Rank-deficient information (e.g. a level absent from this subset).
  const double jitter = 1e-10 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd Hj = H;
  Hj.diagonal().array() += jitter;
  return Hj.ldlt().solve(g);
}

GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const FitControls& controls, double ridge) {
  const Eigen::Index p = X.cols();
  GlmFit fit;
  fit.family = Family::logistic;
  fit.ridge = ridge;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = penalized_loglik(X, y, beta, ridge);
  fit.trace.push_back(ll);

  Eigen::MatrixXd H(p, p);
  for (int iter = 1; iter <= controls.max_iterations; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    const Eigen::VectorXd grad = X.transpose() * (y - mu) - ridge * beta;
    H.noalias() = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge;
    const Eigen::VectorXd step = solve_spd(H, grad);
    const double full = step.cwiseAbs().maxCoeff();

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double ll_new = ll;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      candidate = beta + t * step;
      ll_new = penalized_loglik(X, y, candidate, ridge);
      if (std::isfinite(ll_new) && ll_new >= ll) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent direction left at working precision.
      fit.converged = full < std::sqrt(controls.tolerance);
      break;
    }
    beta = candidate;
    ll = ll_new;
    fit.trace.push_back(ll);
    if (t * full < controls.tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.coefficients = beta;
  fit.log_likelihood = ll;
  {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double m = sigmoid(eta[i]);
      w[i] = m * (1.0 - m);
    }
    H.noalias() = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge;
    const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.separation = ridge == 0.0 && eta.size() > 0 && eta.cwiseAbs().maxCoeff() > kSeparationEta;
  }
  return fit;
}

GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge) {
  GlmFit fit;
  fit.family = Family::linear;
  fit.ridge = ridge;
  fit.iterations = 1;
  fit.converged = true;
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd xtx = X.transpose() * X;
  if (ridge == 0.0) {
    fit.coefficients = X.colPivHouseholderQr().solve(y);
  } else {
    xtx.diagonal().array() += ridge;
    fit.coefficients = xtx.ldlt().solve(X.transpose() * y);
  }
  const Eigen::VectorXd resid = y - X * fit.coefficients;
  const double sigma2 = n > p ? resid.squaredNorm() / static_cast<double>(n - p) : 0.0;
  Eigen::MatrixXd inv = xtx.completeOrthogonalDecomposition().pseudoInverse();
  fit.standard_errors = (sigma2 * inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
  return fit;
}

}  // namespace

void RegressionSpec::validate() const {
  if (!(controls.tolerance > 0))
    throw Error(ErrorKind::config, kOrigin, "convergence tolerance must be > 0");
  if (controls.max_iterations < 1)
    throw Error(ErrorKind::config, kOrigin, "max_iterations must be >= 1");
  if (!(controls.ridge >= 0))
    throw Error(ErrorKind::config, kOrigin, "ridge stabilizer must be >= 0");
  if (design == DesignKind::formula && terms.empty())
    throw Error(ErrorKind::config, kOrigin, "formula design needs at least one term");
}

std::vector<std::vector<std::string>> parse_formula(const std::string& formula) {
  std::vector<std::vector<std::string>> terms;
  std::stringstream ss(formula);
  std::string term;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return std::string{};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
  };
  while (std::getline(ss, term, '+')) {
    std::vector<std::string> factors;
    std::stringstream ts(term);
    std::string f;
    while (std::getline(ts, f, ':')) {
      f = trim(f);
      if (f.empty())
        throw Error(ErrorKind::config, kOrigin, "malformed formula term in '" + formula + "'");
      factors.push_back(f);
    }
    if (factors.empty())
      throw Error(ErrorKind::config, kOrigin, "empty formula term in '" + formula + "'");
    terms.push_back(std::move(factors));
  }
  return terms;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::automatic: return "automatic";
    case Family::logistic: return "logistic";
    case Family::linear: return "linear";
  }
  return "?";
}

std::string to_string(DesignKind d) {
  switch (d) {
    case DesignKind::intercept_only: return "intercept";
    case DesignKind::main_effects: return "main-effects";
    case DesignKind::saturated: return "saturated";
    case DesignKind::formula: return "formula";
  }
  return "?";
}

Design::Design(const CovariateSchema& schema, const RegressionSpec& spec) {
  if (spec.design == DesignKind::saturated)
    throw Error(ErrorKind::config, kOrigin, "saturated designs are fit by cell means");
  std::vector<std::vector<std::string>> terms;
  if (spec.design == DesignKind::main_effects)
    for (const auto& c : schema.covariates()) terms.push_back({c.name});
  if (spec.design == DesignKind::formula) terms = spec.terms;

  columns_.push_back({});
  names_.push_back("(intercept)");
  for (const auto& term : terms) {
    std::vector<std::vector<Factor>> products{{}};
    std::vector<std::string> labels{""};
    for (const auto& name : term) {
      const std::size_t j = schema.index_of(name);
      std::vector<std::vector<Factor>> next;
      std::vector<std::string> next_labels;
      for (std::size_t k = 0; k < products.size(); ++k) {
        const std::string sep = labels[k].empty() ? "" : ":";
        if (schema[j].kind == CovariateKind::continuous) {
          auto prod = products[k];
          prod.push_back({j, false, 0});
          next.push_back(std::move(prod));
          next_labels.push_back(labels[k] + sep + name);
        } else {
          for (std::size_t level = 1; level < schema[j].levels.size(); ++level) {
            auto prod = products[k];
            prod.push_back({j, true, level});
            next.push_back(std::move(prod));
            next_labels.push_back(labels[k] + sep + name + "=" + schema[j].levels[level]);
          }
        }
      }
      products = std::move(next);
      labels = std::move(next_labels);
    }
    for (std::size_t k = 0; k < products.size(); ++k) {
      columns_.push_back(std::move(products[k]));
      names_.push_back(std::move(labels[k]));
    }
  }
}

void Design::fill_row(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    double v = 1.0;
    for (const auto& f : columns_[c])
      v *= f.categorical ? (x[f.covariate] == static_cast<double>(f.level) ? 1.0 : 0.0)
                         : x[f.covariate];
    out[c] = v;
  }
}

Eigen::MatrixXd Design::matrix(const ObservedDataset& data,
                               std::span<const std::size_t> rows) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(columns()));
  std::vector<double> buf(columns());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    fill_row(data.x(rows[k]), buf);
    for (std::size_t c = 0; c < buf.size(); ++c)
      X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = buf[c];
  }
  return X;
}

Family resolve_family(Family requested, std::span<const double> response) {
  if (requested != Family::automatic) return requested;
  const bool binary = std::all_of(response.begin(), response.end(),
                                  [](double v) { return v == 0.0 || v == 1.0; });
  return binary ? Family::logistic : Family::linear;
}

GlmFit fit_binary_regression(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             Family family, const FitControls& controls) {
  if (design.rows() == 0) throw Error(ErrorKind::validation, kOrigin, "regression has no rows");
  if (design.rows() != response.size())
    throw Error(ErrorKind::validation, kOrigin, "design and response differ in length");
  family = resolve_family(family, {response.data(), static_cast<std::size_t>(response.size())});
  if (family == Family::linear) return fit_linear(design, response, controls.ridge);

  for (Eigen::Index i = 0; i < response.size(); ++i)
    if (response[i] != 0.0 && response[i] != 1.0)
      throw Error(ErrorKind::validation, kOrigin,
                  "logistic response must be 0/1 (row " + std::to_string(i + 1) + ")")
          .with_row(static_cast<std::size_t>(i + 1));
  GlmFit fit = fit_logistic(design, response, controls, controls.ridge);
  if (fit.separation) {
    GlmFit refit = fit_logistic(design, response, controls, kSeparationRidge);
    refit.separation = true;
    return refit;
  }
  return fit;
}

std::vector<double> ConditionalMean::predict_rows(const ObservedDataset& data) const {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = predict(data.x(i));
  return out;
}

GlmPredictor::GlmPredictor(Design design, GlmFit fit, FitDiagnostics diag)
    : design_(std::move(design)), fit_(std::move(fit)), diag_(std::move(diag)) {}

double GlmPredictor::predict(std::span<const double> x) const {
  double eta = 0;
  thread_local std::vector<double> row;
  row.resize(design_.columns());
  design_.fill_row(x, row);
  for (std::size_t c = 0; c < row.size(); ++c) eta += row[c] * fit_.coefficients[static_cast<Eigen::Index>(c)];
  return fit_.family == Family::logistic ? sigmoid(eta) : eta;
}

CellMeans::CellMeans(std::shared_ptr<const CellTable> cells, std::vector<double> sums,
                     std::vector<std::size_t> counts, FitDiagnostics diag)
    : cells_(std::move(cells)), means_(std::move(sums)), counts_(std::move(counts)),
      diag_(std::move(diag)) {
  for (std::size_t c = 0; c < means_.size(); ++c)
    if (counts_[c] > 0) means_[c] /= static_cast<double>(counts_[c]);
}

std::size_t CellMeans::locate(std::span<const double> x) const {
  const std::size_t n = cells_->size();
  if (cells_->width == 0) return 0;
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const auto c = cells_->cell(mid);
    if (std::lexicographical_compare(c.begin(), c.end(), x.begin(), x.end()))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < n && std::equal(x.begin(), x.end(), cells_->cell(lo).begin())) return lo;
  return n;
}

void CellMeans::empty(std::span<const double> x) const {
  std::string cell = "(";
  for (std::size_t j = 0; j < x.size(); ++j) cell += (j ? ", " : "") + format_double(x[j]);
  cell += ")";
  throw Error(ErrorKind::empty_cell, kOrigin, diag_.model + ": no training rows in cell x = " + cell);
}

double CellMeans::predict(std::span<const double> x) const {
  const std::size_t c = locate(x);
  if (c >= counts_.size() || counts_[c] == 0) empty(x);
  return means_[c];
}

std::size_t CellMeans::count(std::span<const double> x) const {
  const std::size_t c = locate(x);
  return c >= counts_.size() ? 0 : counts_[c];
}

std::vector<double> CellMeans::predict_rows(const ObservedDataset& data) const {
  if (data.cell_table().get() != cells_.get()) return ConditionalMean::predict_rows(data);
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint32_t c = data.cell_of(i);
    if (counts_[c] == 0) empty(data.x(i));
    out[i] = means_[c];
  }
  return out;
}

std::vector<std::size_t> rows_in_arm(const ObservedDataset& data, int arm) {
  std::vector<std::size_t> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    if (arm < 0 || data.z(i) == arm) rows.push_back(i);
  return rows;
}

CellMeans fit_cell_means(const ObservedDataset& data, std::span<const double> response,
                         std::span<const std::size_t> rows, std::string model) {
  const auto table = data.cell_table();
  std::vector<double> sums(table->size(), 0.0);
  std::vector<std::size_t> counts(table->size(), 0);
  for (const std::size_t i : rows) {
    sums[data.cell_of(i)] += response[i];
    ++counts[data.cell_of(i)];
  }
  FitDiagnostics diag;
  diag.model = std::move(model);
  diag.method = "cell-means";
  diag.rows = rows.size();
  diag.cells = static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
  diag.empty_cells = counts.size() - diag.cells;
  return CellMeans(table, std::move(sums), std::move(counts), std::move(diag));
}

namespace {

// Intercept-only fit without a penalty: the maximum-likelihood prediction of
// both families is the sample mean, computed here exactly.
class SampleMean final : public ConditionalMean {
 public:
  SampleMean(double mean, FitDiagnostics diag) : mean_(mean), diag_(std::move(diag)) {}
  double predict(std::span<const double>) const override { return mean_; }
  const FitDiagnostics& diagnostics() const noexcept override { return diag_; }

 private:
  double mean_;
  FitDiagnostics diag_;
};

}  // namespace

std::shared_ptr<const ConditionalMean> fit_conditional_mean(const ObservedDataset& data,
                                                            std::span<const double> response,
                                                            std::span<const std::size_t> rows,
                                                            const RegressionSpec& spec,
                                                            Family resolved_family,
                                                            std::string model) {
  if (rows.empty())
    throw Error(ErrorKind::validation, kOrigin, model + ": no rows to fit");
  if (spec.design == DesignKind::saturated)
    return std::make_shared<CellMeans>(fit_cell_means(data, response, rows, std::move(model)));

  if (spec.design == DesignKind::intercept_only && spec.controls.ridge == 0.0) {
    double sum = 0;
    for (const std::size_t i : rows) sum += response[i];
    FitDiagnostics diag;
    diag.model = std::move(model);
    diag.method = "sample-mean";
    diag.rows = rows.size();
    return std::make_shared<SampleMean>(sum / static_cast<double>(rows.size()), std::move(diag));
  }

  Design design(data.schema(), spec);
  const Eigen::MatrixXd X = design.matrix(data, rows);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) y[static_cast<Eigen::Index>(k)] = response[rows[k]];
  GlmFit fit = fit_binary_regression(X, y, resolved_family, spec.controls);
  FitDiagnostics diag;
  diag.model = std::move(model);
  diag.method = to_string(fit.family);
  diag.rows = rows.size();
  diag.iterations = fit.iterations;
  diag.converged = fit.converged;
  diag.separation = fit.separation;
  diag.ridge = fit.ridge;
  return std::make_shared<GlmPredictor>(std::move(design), std::move(fit), std::move(diag));
}

}  // namespace sivwate
