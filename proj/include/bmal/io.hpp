#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bmal/atoms.hpp"

namespace bmal {

/// Which columns of a CSV file become features and response.
///
/// A feature term is a column name or a product of names joined by ':'
/// (e.g. "alcohol:pH" for an interaction). An empty feature list selects
/// every column except the response.
struct CsvSchema {
  std::vector<std::string> features;
  std::string response;  // empty: no response column
  bool add_intercept = false;
  char delimiter = ',';
};

struct CsvData {
  MatrixXd z;                     // one row per record, one column per term
  std::optional<VectorXd> y;
  std::vector<std::string> columns;  // term names, "(intercept)" first when injected
};

/// Parses a header + numeric body. Decimal points are '.' regardless of
/// locale. Missing, empty or "NA" cells in declared columns are rejected
/// with ParseError(line, column).
CsvData parse_csv(std::istream& in, const CsvSchema& schema);
CsvData ingest_csv(const std::string& path, const CsvSchema& schema);

/// Splits "a,b, c" into trimmed non-empty pieces.
std::vector<std::string> split_list(const std::string& text, char sep = ',');

/// One index per line (a non-numeric first line is taken as a header).
std::vector<Index> read_index_file(const std::string& path);

/// Reads a numeric matrix from a headerless CSV file.
MatrixXd read_matrix_csv(const std::string& path);

/// Shortest representation that parses back to the same double.
std::string format_double(double x);

}  // namespace bmal
