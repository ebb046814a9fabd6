#include "adaptgd/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

namespace adaptgd {

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what)
    : DatasetError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset file " + path);
  return in;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_long(std::string_view s, long& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

LabeledData load_libsvm(const std::string& path, int num_features) {
  if (num_features < 0) throw ConfigError("num_features must be nonnegative");
  std::ifstream in = open_or_throw(path);

  struct Row {
    double label;
    std::vector<std::pair<long, double>> entries;
  };
  std::vector<Row> rows;
  std::set<double> labels;
  long max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;  // blank line

    Row row;
    if (!parse_double(tok, row.label)) throw ParseError(path, line_no, "bad label '" + tok + "'");
    labels.insert(row.label);
    if (labels.size() > 2)
      throw LabelError(path + ":" + std::to_string(line_no) + ": more than two distinct labels");

    while (tokens >> tok) {
      const auto colon = tok.find(':');
      long idx = 0;
      double val = 0.0;
      if (colon == std::string::npos ||
          !parse_long(std::string_view(tok).substr(0, colon), idx) ||
          !parse_double(std::string_view(tok).substr(colon + 1), val))
        throw ParseError(path, line_no, "bad feature '" + tok + "'");
      if (idx < 1) throw ParseError(path, line_no, "feature indices are 1-based");
      if (num_features > 0 && idx > num_features)
        throw DimensionError(path + ":" + std::to_string(line_no) + ": feature index exceeds num_features");
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DatasetError("dataset file " + path + " has no rows");

  const long d = num_features > 0 ? num_features : max_index;
  LabeledData out;
  out.A = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), d);
  out.b.resize(static_cast<Eigen::Index>(rows.size()));
  const double low = *labels.begin();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (const auto& [idx, val] : rows[i].entries) out.A(r, idx - 1) = val;
    if (labels.size() == 2)
      out.b(r) = rows[i].label == low ? -1.0 : 1.0;
    else
      out.b(r) = rows[i].label > 0.0 ? 1.0 : -1.0;
  }
  return out;
}

RatingsData load_movielens(const std::string& path, int rows, int cols) {
  if (rows < 0 || cols < 0) throw ConfigError("matrix bounds must be nonnegative");
  std::ifstream in = open_or_throw(path);

  std::vector<std::tuple<long, long, double>> triples;
  long max_user = 0;
  long max_item = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string user_s, item_s, rating_s;
    long user = 0, item = 0;
    double rating = 0.0;
    if (!std::getline(fields, user_s, '\t') || !std::getline(fields, item_s, '\t') ||
        !std::getline(fields, rating_s, '\t') || !parse_long(user_s, user) ||
        !parse_long(item_s, item) || !parse_double(rating_s, rating))
      throw ParseError(path, line_no, "expected 'user<TAB>item<TAB>rating<TAB>timestamp'");
    if (user < 1 || item < 1) throw ParseError(path, line_no, "ids are 1-based");
    if ((rows > 0 && user > rows) || (cols > 0 && item > cols))
      throw DimensionError(path + ":" + std::to_string(line_no) + ": id exceeds declared bounds");
    max_user = std::max(max_user, user);
    max_item = std::max(max_item, item);
    triples.emplace_back(user, item, rating);
  }

  RatingsData out;
  out.A = Matrix::Zero(rows > 0 ? rows : max_user, cols > 0 ? cols : max_item);
  std::set<std::pair<long, long>> seen;
  for (const auto& [user, item, rating] : triples) {
    if (!seen.emplace(user, item).second) ++out.duplicates;
    out.A(user - 1, item - 1) = rating;
  }
  out.entries = seen.size();
  if (out.duplicates > 0)
    std::clog << "warning: " << out.duplicates << " duplicate ratings in " << path
              << "; the last occurrence was kept\n";
  return out;
}

}  // namespace adaptgd
