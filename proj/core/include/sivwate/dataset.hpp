#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sivwate {

enum class CovariateKind { continuous, categorical };

struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::continuous;
  // Level labels for categorical covariates; the stored value is the level index.
  std::vector<std::string> levels;

  static Covariate continuous(std::string name);
  static Covariate categorical(std::string name, std::vector<std::string> levels);

  bool operator==(const Covariate&) const = default;
};

class CovariateSchema {
 public:
  CovariateSchema() = default;
  explicit CovariateSchema(std::vector<Covariate> covariates);

  std::size_t size() const noexcept { return covariates_.size(); }
  bool empty() const noexcept { return covariates_.empty(); }
  const Covariate& operator[](std::size_t i) const { return covariates_[i]; }
  const std::vector<Covariate>& covariates() const noexcept { return covariates_; }

  // Throws a schema error when the name is unknown.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const noexcept;

  bool operator==(const CovariateSchema&) const = default;

 private:
  std::vector<Covariate> covariates_;
};

// Distinct covariate vectors of a dataset, sorted lexicographically. Rows of a
// dataset (and of every resample derived from it) refer to cells by index.
struct CellTable {
  std::size_t width = 0;
  std::vector<double> values;  // row-major, width entries per cell

  std::size_t size() const noexcept { return width == 0 ? 1 : values.size() / width; }
  std::span<const double> cell(std::size_t i) const {
    return {values.data() + i * width, width};
  }
};

// Immutable per-subject observations (y, d, z, x). Construction validates:
// binary d and z, covariate width matching the schema, categorical codes in
// range, finite values, and both instrument arms present.
class ObservedDataset {
 public:
  ObservedDataset(CovariateSchema schema, std::vector<double> y, std::vector<std::uint8_t> d,
                  std::vector<std::uint8_t> z, std::vector<double> x);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t width() const noexcept { return schema_.size(); }
  const CovariateSchema& schema() const noexcept { return schema_; }

  double y(std::size_t i) const { return y_[i]; }
  int d(std::size_t i) const { return d_[i]; }
  int z(std::size_t i) const { return z_[i]; }
  std::span<const double> x(std::size_t i) const {
    return {x_.data() + i * width(), width()};
  }

  std::span<const double> outcomes() const noexcept { return y_; }
  std::span<const std::uint8_t> treatments() const noexcept { return d_; }
  std::span<const std::uint8_t> instruments() const noexcept { return z_; }
  std::span<const double> covariates() const noexcept { return x_; }

  const CellTable& cells() const noexcept { return *cells_; }
  std::shared_ptr<const CellTable> cell_table() const noexcept { return cells_; }
  std::uint32_t cell_of(std::size_t i) const { return cell_of_[i]; }

  std::size_t count_instrument(int z_value) const noexcept;

  // Rows at the given indices (repeats allowed), sharing this dataset's cell table.
  ObservedDataset subset(std::span<const std::size_t> rows) const;

  // Same rows with the outcome replaced pointwise.
  ObservedDataset with_outcomes(std::vector<double> y) const;
  // Same rows with the instrument relabelled z -> 1 - z.
  ObservedDataset with_swapped_instrument() const;

  friend bool operator==(const ObservedDataset& a, const ObservedDataset& b);

 private:
  struct Shared {};
  ObservedDataset(Shared, CovariateSchema schema, std::vector<double> y,
                  std::vector<std::uint8_t> d, std::vector<std::uint8_t> z,
                  std::vector<double> x, std::shared_ptr<const CellTable> cells,
                  std::vector<std::uint32_t> cell_of);
  void validate() const;
  void build_cells();

  CovariateSchema schema_;
  std::vector<double> y_;
  std::vector<std::uint8_t> d_;
  std::vector<std::uint8_t> z_;
  std::vector<double> x_;
  std::shared_ptr<const CellTable> cells_;
  std::vector<std::uint32_t> cell_of_;
};

}  // namespace sivwate
