#include "sivwate/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>
#include <vector>

#include "sivwate/error.hpp"

namespace sivwate {

namespace {

constexpr const char* kOrigin = "core_data";

// Splits one CSV record; handles double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, const std::string& column, std::size_t row) {
  const std::string s = trim(cell);
  if (s.empty())
    throw Error(ErrorKind::parse, kOrigin,
                "missing value in column '" + column + "' at row " + std::to_string(row))
        .with_row(row);
  double v = 0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::parse, kOrigin,
                "unparseable number '" + s + "' in column '" + column + "' at row " +
                    std::to_string(row))
        .with_row(row);
  return v;
}

std::uint8_t parse_binary(const std::string& cell, const std::string& column, std::size_t row) {
  const double v = parse_number(cell, column, row);
  if (v != 0.0 && v != 1.0)
    throw Error(ErrorKind::validation, kOrigin,
                "non-binary value '" + trim(cell) + "' in column '" + column + "' at row " +
                    std::to_string(row))
        .with_row(row);
  return static_cast<std::uint8_t>(v);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

const std::string& ColumnMap::column_for(const std::string& covariate) const {
  const auto it = covariates.find(covariate);
  return it == covariates.end() ? covariate : it->second;
}

ObservedDataset read_csv(std::istream& in, const CovariateSchema& schema,
                         const ColumnMap& columns) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::parse, kOrigin, "CSV input is empty; header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_record(line);

  auto locate = [&](const std::string& name) -> std::size_t {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (trim(header[k]) == name) return k;
    throw Error(ErrorKind::schema, kOrigin, "missing column '" + name + "' in CSV header");
  };
  const std::size_t col_y = locate(columns.outcome);
  const std::size_t col_d = locate(columns.treatment);
  const std::size_t col_z = locate(columns.instrument);
  std::vector<std::size_t> col_x;
  for (const auto& c : schema.covariates()) col_x.push_back(locate(columns.column_for(c.name)));

  std::vector<double> y, x;
  std::vector<std::uint8_t> d, z;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto cells = split_record(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::parse, kOrigin,
                  "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(header.size()))
          .with_row(row);
    y.push_back(parse_number(cells[col_y], columns.outcome, row));
    d.push_back(parse_binary(cells[col_d], columns.treatment, row));
    z.push_back(parse_binary(cells[col_z], columns.instrument, row));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& cov = schema[j];
      const std::string& colname = columns.column_for(cov.name);
      if (cov.kind == CovariateKind::continuous) {
        x.push_back(parse_number(cells[col_x[j]], colname, row));
      } else {
        const std::string label = trim(cells[col_x[j]]);
        std::size_t k = 0;
        while (k < cov.levels.size() && cov.levels[k] != label) ++k;
        if (label.empty())
          throw Error(ErrorKind::parse, kOrigin,
                      "missing value in column '" + colname + "' at row " + std::to_string(row))
              .with_row(row);
        if (k == cov.levels.size())
          throw Error(ErrorKind::validation, kOrigin,
                      "unknown level '" + label + "' in column '" + colname + "' at row " +
                          std::to_string(row))
              .with_row(row);
        x.push_back(static_cast<double>(k));
      }
    }
  }
  return ObservedDataset(schema, std::move(y), std::move(d), std::move(z), std::move(x));
}

ObservedDataset load_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                         const ColumnMap& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, kOrigin, "cannot open '" + path.string() + "'");
  return read_csv(in, schema, columns);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const ObservedDataset& data, const ColumnMap& columns) {
  const auto& schema = data.schema();
  out << quote_if_needed(columns.outcome) << ',' << quote_if_needed(columns.treatment) << ','
      << quote_if_needed(columns.instrument);
  for (const auto& c : schema.covariates()) out << ',' << quote_if_needed(columns.column_for(c.name));
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.y(i)) << ',' << data.d(i) << ',' << data.z(i);
    const auto xi = data.x(i);
    for (std::size_t j = 0; j < schema.size(); ++j) {
      out << ',';
      if (schema[j].kind == CovariateKind::categorical)
        out << quote_if_needed(schema[j].levels[static_cast<std::size_t>(xi[j])]);
      else
        out << format_double(xi[j]);
    }
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const ObservedDataset& data,
              const ColumnMap& columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, kOrigin, "cannot write '" + path.string() + "'");
  write_csv(out, data, columns);
  if (!out) throw Error(ErrorKind::io, kOrigin, "write failed for '" + path.string() + "'");
}

}  // namespace sivwate
