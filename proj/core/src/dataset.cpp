#include "sivwate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {
constexpr const char* kOrigin = "core_data";
}

Covariate Covariate::continuous(std::string name) {
  return Covariate{std::move(name), CovariateKind::continuous, {}};
}

Covariate Covariate::categorical(std::string name, std::vector<std::string> levels) {
  return Covariate{std::move(name), CovariateKind::categorical, std::move(levels)};
}

CovariateSchema::CovariateSchema(std::vector<Covariate> covariates)
    : covariates_(std::move(covariates)) {
  std::set<std::string> seen;
  for (const auto& c : covariates_) {
    if (c.name.empty()) throw Error(ErrorKind::schema, kOrigin, "covariate with empty name");
    if (!seen.insert(c.name).second)
      throw Error(ErrorKind::schema, kOrigin, "duplicate covariate name '" + c.name + "'");
    if (c.kind == CovariateKind::categorical) {
      if (c.levels.empty())
        throw Error(ErrorKind::schema, kOrigin,
                    "categorical covariate '" + c.name + "' has no levels");
      std::set<std::string> lv(c.levels.begin(), c.levels.end());
      if (lv.size() != c.levels.size())
        throw Error(ErrorKind::schema, kOrigin,
                    "categorical covariate '" + c.name + "' has duplicate levels");
    } else if (!c.levels.empty()) {
      throw Error(ErrorKind::schema, kOrigin,
                  "continuous covariate '" + c.name + "' must not declare levels");
    }
  }
}

std::size_t CovariateSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < covariates_.size(); ++i)
    if (covariates_[i].name == name) return i;
  throw Error(ErrorKind::schema, kOrigin, "unknown covariate '" + name + "'");
}

bool CovariateSchema::contains(const std::string& name) const noexcept {
  return std::any_of(covariates_.begin(), covariates_.end(),
                     [&](const Covariate& c) { return c.name == name; });
}

ObservedDataset::ObservedDataset(CovariateSchema schema, std::vector<double> y,
                                 std::vector<std::uint8_t> d, std::vector<std::uint8_t> z,
                                 std::vector<double> x)
    : schema_(std::move(schema)),
      y_(std::move(y)),
      d_(std::move(d)),
      z_(std::move(z)),
      x_(std::move(x)) {
  validate();
  build_cells();
}

ObservedDataset::ObservedDataset(Shared, CovariateSchema schema, std::vector<double> y,
                                 std::vector<std::uint8_t> d, std::vector<std::uint8_t> z,
                                 std::vector<double> x, std::shared_ptr<const CellTable> cells,
                                 std::vector<std::uint32_t> cell_of)
    : schema_(std::move(schema)),
      y_(std::move(y)),
      d_(std::move(d)),
      z_(std::move(z)),
      x_(std::move(x)),
      cells_(std::move(cells)),
      cell_of_(std::move(cell_of)) {
  if (count_instrument(0) == 0 || count_instrument(1) == 0)
    throw Error(ErrorKind::validation, kOrigin, "dataset needs rows in both instrument arms");
}

void ObservedDataset::validate() const {
  const std::size_t n = y_.size();
  if (n == 0) throw Error(ErrorKind::validation, kOrigin, "dataset has no rows");
  if (d_.size() != n || z_.size() != n)
    throw Error(ErrorKind::validation, kOrigin, "y, d and z columns differ in length");
  if (x_.size() != n * width())
    throw Error(ErrorKind::validation, kOrigin,
                "covariate matrix does not match schema width " + std::to_string(width()));
  for (std::size_t i = 0; i < n; ++i) {
    if (d_[i] > 1)
      throw Error(ErrorKind::validation, kOrigin,
                  "non-binary treatment at row " + std::to_string(i + 1))
          .with_row(i + 1);
    if (z_[i] > 1)
      throw Error(ErrorKind::validation, kOrigin,
                  "non-binary instrument at row " + std::to_string(i + 1))
          .with_row(i + 1);
    if (!std::isfinite(y_[i]))
      throw Error(ErrorKind::validation, kOrigin,
                  "non-finite outcome at row " + std::to_string(i + 1))
          .with_row(i + 1);
    for (std::size_t j = 0; j < width(); ++j) {
      const double v = x_[i * width() + j];
      if (!std::isfinite(v))
        throw Error(ErrorKind::validation, kOrigin,
                    "non-finite covariate '" + schema_[j].name + "' at row " +
                        std::to_string(i + 1))
            .with_row(i + 1);
      if (schema_[j].kind == CovariateKind::categorical) {
        const double levels = static_cast<double>(schema_[j].levels.size());
        if (v < 0 || v >= levels || v != std::floor(v))
          throw Error(ErrorKind::validation, kOrigin,
                      "categorical code out of range for '" + schema_[j].name + "' at row " +
                          std::to_string(i + 1))
              .with_row(i + 1);
      }
    }
  }
  if (count_instrument(0) == 0 || count_instrument(1) == 0)
    throw Error(ErrorKind::validation, kOrigin, "dataset needs rows in both instrument arms");
}

void ObservedDataset::build_cells() {
  const std::size_t n = size();
  const std::size_t p = width();
  auto table = std::make_shared<CellTable>();
  table->width = p;
  cell_of_.assign(n, 0);
  if (p == 0) {
    cells_ = std::move(table);
    return;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(x_.begin() + a * p, x_.begin() + (a + 1) * p,
                                        x_.begin() + b * p, x_.begin() + (b + 1) * p);
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  std::uint32_t current = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (k > 0 && row_less(order[k - 1], i)) ++current;
    if (k == 0 || row_less(order[k - 1], i))
      table->values.insert(table->values.end(), x_.begin() + i * p, x_.begin() + (i + 1) * p);
    cell_of_[i] = current;
  }
  cells_ = std::move(table);
}

std::size_t ObservedDataset::count_instrument(int z_value) const noexcept {
  return static_cast<std::size_t>(
      std::count(z_.begin(), z_.end(), static_cast<std::uint8_t>(z_value)));
}

ObservedDataset ObservedDataset::subset(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw Error(ErrorKind::validation, kOrigin, "empty row subset");
  const std::size_t p = width();
  std::vector<double> y(rows.size());
  std::vector<std::uint8_t> d(rows.size()), z(rows.size());
  std::vector<double> x(rows.size() * p);
  std::vector<std::uint32_t> cell_of(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    y[k] = y_[i];
    d[k] = d_[i];
    z[k] = z_[i];
    std::copy_n(x_.begin() + i * p, p, x.begin() + k * p);
    cell_of[k] = cell_of_[i];
  }
  return ObservedDataset(Shared{}, schema_, std::move(y), std::move(d), std::move(z),
                         std::move(x), cells_, std::move(cell_of));
}

ObservedDataset ObservedDataset::with_outcomes(std::vector<double> y) const {
  if (y.size() != size())
    throw Error(ErrorKind::validation, kOrigin, "replacement outcome column has wrong length");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i]))
      throw Error(ErrorKind::validation, kOrigin,
                  "non-finite outcome at row " + std::to_string(i + 1))
          .with_row(i + 1);
  return ObservedDataset(Shared{}, schema_, std::move(y), d_, z_, x_, cells_, cell_of_);
}

ObservedDataset ObservedDataset::with_swapped_instrument() const {
  std::vector<std::uint8_t> z(z_.size());
  std::transform(z_.begin(), z_.end(), z.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(1 - v); });
  return ObservedDataset(Shared{}, schema_, y_, d_, std::move(z), x_, cells_, cell_of_);
}

bool operator==(const ObservedDataset& a, const ObservedDataset& b) {
  return a.schema_ == b.schema_ && a.y_ == b.y_ && a.d_ == b.d_ && a.z_ == b.z_ &&
         a.x_ == b.x_;
}

}  // namespace sivwate
