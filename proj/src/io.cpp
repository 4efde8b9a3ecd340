#include "bmal/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

#include "bmal/errors.hpp"

namespace bmal {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Splits one record; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_record(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool getline_clean(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    std::string piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    start = end + 1;
  }
  return out;
}

CsvData parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!getline_clean(in, line)) throw EmptyInput("input has no header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_record(line, schema.delimiter);
  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!position.emplace(header[c], c).second) throw ParseError("duplicate column '" + header[c] + "'", 1, c + 1);
  }
  auto locate = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw ParseError("unknown column '" + name + "'", 1, 0);
    return it->second;
  };

  std::vector<std::vector<std::size_t>> terms;
  std::vector<std::string> term_names;
  if (schema.features.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == schema.response) continue;
      terms.push_back({c});
      term_names.push_back(header[c]);
    }
  } else {
    for (const std::string& term : schema.features) {
      std::vector<std::size_t> factors;
      for (const std::string& name : split_list(term, ':')) factors.push_back(locate(name));
      if (factors.empty()) throw InvalidArgument("empty feature term");
      terms.push_back(std::move(factors));
      term_names.push_back(term);
    }
  }
  const std::optional<std::size_t> response =
      schema.response.empty() ? std::nullopt : std::optional<std::size_t>(locate(schema.response));

  std::vector<std::size_t> needed;
  for (const auto& t : terms) needed.insert(needed.end(), t.begin(), t.end());
  if (response) needed.push_back(*response);
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  std::vector<double> values(header.size(), 0.0);
  while (getline_clean(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_record(line, schema.delimiter);
    for (std::size_t c : needed) {
      const std::size_t col = c + 1;
      if (c >= fields.size()) throw ParseError("missing value for column '" + header[c] + "'", line_no, col);
      if (!parse_number(fields[c], values[c]))
        throw ParseError("non-numeric value '" + fields[c] + "' in column '" + header[c] + "'", line_no, col);
    }
    std::vector<double> row;
    row.reserve(terms.size() + 1);
    for (const auto& t : terms) {
      double v = 1.0;
      for (std::size_t c : t) v *= values[c];
      row.push_back(v);
    }
    if (response) row.push_back(values[*response]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInput("input has no data rows");

  const Index n = static_cast<Index>(rows.size());
  const Index off = schema.add_intercept ? 1 : 0;
  const Index k = static_cast<Index>(terms.size());
  CsvData out;
  out.z.resize(n, k + off);
  if (response) out.y = VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (off) out.z(i, 0) = 1.0;
    for (Index j = 0; j < k; ++j) out.z(i, j + off) = row[static_cast<std::size_t>(j)];
    if (response) (*out.y)[i] = row.back();
  }
  if (off) out.columns.push_back("(intercept)");
  out.columns.insert(out.columns.end(), term_names.begin(), term_names.end());
  return out;
}

CsvData ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open input file '" + path + "'");
  return parse_csv(in, schema);
}

std::vector<Index> read_index_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open index file '" + path + "'");
  std::vector<Index> out;
  std::string line;
  std::size_t line_no = 0;
  while (getline_clean(in, line)) {
    ++line_no;
    const std::string field = trim(split_record(line, ',').front());
    if (field.empty()) continue;
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      if (line_no == 1) continue;
      throw ParseError("invalid index '" + field + "'", line_no, 1);
    }
    out.push_back(static_cast<Index>(v));
  }
  if (out.empty()) throw EmptyInput("index file '" + path + "' lists no indices");
  return out;
}

MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open matrix file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (getline_clean(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    const auto fields = split_record(line, ',');
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_number(fields[c], v)) throw ParseError("non-numeric value '" + fields[c] + "'", line_no, c + 1);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged row", line_no, 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInput("matrix file '" + path + "' is empty");
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("NA");
}

}  // namespace bmal
