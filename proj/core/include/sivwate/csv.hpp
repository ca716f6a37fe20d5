#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "sivwate/dataset.hpp"

namespace sivwate {

// CSV column assigned to each role. Covariates are looked up by schema name
// unless remapped in `covariates`.
struct ColumnMap {
  std::string outcome = "y";
  std::string treatment = "d";
  std::string instrument = "z";
  std::map<std::string, std::string> covariates;  // schema name -> CSV column

  const std::string& column_for(const std::string& covariate) const;
};

// UTF-8, header row, comma separated, '.' decimal point. Categorical cells hold
// level labels. Empty cells are rejected.
ObservedDataset read_csv(std::istream& in, const CovariateSchema& schema,
                         const ColumnMap& columns = {});
ObservedDataset load_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                         const ColumnMap& columns = {});

// Shortest round-trip formatting, so load_csv(save_csv(ds)) == ds.
void write_csv(std::ostream& out, const ObservedDataset& data, const ColumnMap& columns = {});
void save_csv(const std::filesystem::path& path, const ObservedDataset& data,
              const ColumnMap& columns = {});

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace sivwate
