#pragma once

// CSV ingestion and emission, train-statistic standardization and train/test splits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdridge/dataset.hpp"
#include "sdridge/errors.hpp"
#include "sdridge/format.hpp"

namespace sdridge {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_missing(std::string_view f) {
  return f.empty() || f == "NA" || f == "NaN" || f == "nan" || f == "?";
}

}  // namespace detail

/// Target column: a header name, or a 0-based index; empty selects the last column.
struct CsvOptions {
  std::string target_column;
  bool has_header = true;
};

/// Parses comma-separated numeric data. Rows containing a missing cell (empty, NA, NaN, nan, ?)
/// are dropped; any other non-numeric cell is a ParseError naming its line and column.
inline Dataset read_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t width = 0;
  if (opt.has_header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw DataError("CSV input is empty");
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    for (auto f : detail::split_fields(line)) header.emplace_back(f);
    width = header.size();
  }

  std::vector<std::vector<double>> rows;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto fields = detail::split_fields(line);
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    bool missing = false;
    for (std::size_t c = 0; c < width; ++c) {
      const std::string_view f = fields[c];
      if (detail::is_missing(f)) {
        missing = true;
        continue;
      }
      const char* first = f.data();
      if (*first == '+') ++first;
      const auto res = std::from_chars(first, f.data() + f.size(), row[c]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(row[c])) {
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": not a number: '" + std::string(f) + "'");
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (width < 2) throw DataError("CSV needs at least one feature column and a target column");
  if (rows.empty()) throw DataError("no complete rows in CSV input");

  std::size_t target = width - 1;
  if (!opt.target_column.empty()) {
    const auto it = std::find(header.begin(), header.end(), opt.target_column);
    if (it != header.end()) {
      target = static_cast<std::size_t>(it - header.begin());
    } else {
      std::size_t idx = 0;
      const auto& t = opt.target_column;
      const auto res = std::from_chars(t.data(), t.data() + t.size(), idx);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size() || idx >= width) {
        throw ParameterError("unknown target column '" + t + "'");
      }
      target = idx;
    }
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(width - 1);
  MatrixXd x(n, p);
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == target) y(i) = rows[i][c];
      else x(i, j++) = rows[i][c];
    }
  }
  Dataset d(std::move(x), std::move(y));
  for (std::size_t c = 0; c < width; ++c) {
    if (c == target) continue;
    d.feature_names.push_back(header.empty() ? "x" + std::to_string(c) : header[c]);
  }
  return d;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, opt);
}

/// Writes features then the target as the last column, with shortest round-trip numbers.
inline void write_csv(std::ostream& os, const Dataset& d, const std::string& target_name = "y") {
  for (Eigen::Index j = 0; j < d.p(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    os << (uj < d.feature_names.size() ? d.feature_names[uj] : "x" + std::to_string(j)) << ',';
  }
  os << target_name << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) os << format_double(d.X(i, j)) << ',';
    os << format_double(d.y(i)) << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& d, const std::string& target_name = "y") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, d, target_name);
}

/// Reads a plain numeric matrix (no header), e.g. a penalty matrix.
inline MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    for (auto f : detail::split_fields(line)) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + std::string(f) + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged matrix at line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty matrix file '" + path + "'");
  MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

struct Standardized {
  Dataset train;
  Dataset test;
  StandardizationStats stats;
};

/// Centers and scales features and target of both sets with train-only means and sample
/// standard deviations; zero-variance train columns are dropped from both.
inline Standardized standardize(const Dataset& train, const Dataset& test) {
  if (train.n() < 2) throw DataError("standardization needs at least two training rows");
  if (test.p() != train.p()) throw DataError("train and test have different numbers of features");
  const double n = static_cast<double>(train.n());
  StandardizationStats st;
  const VectorXd mean = train.X.colwise().mean();
  std::vector<double> sds;
  for (Eigen::Index j = 0; j < train.p(); ++j) {
    const double sd = std::sqrt((train.X.col(j).array() - mean(j)).square().sum() / (n - 1.0));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean(j)))) {
      st.kept_columns.push_back(static_cast<std::size_t>(j));
      sds.push_back(sd);
    } else {
      st.dropped_columns.push_back(static_cast<std::size_t>(j));
    }
  }
  if (st.kept_columns.empty()) throw DataError("all feature columns have zero variance on the training set");
  st.target_mean = train.y.mean();
  st.target_std = std::sqrt((train.y.array() - st.target_mean).square().sum() / (n - 1.0));
  if (!(st.target_std > 0.0)) throw DataError("target has zero variance on the training set");

  const auto k = static_cast<Eigen::Index>(st.kept_columns.size());
  st.feature_mean.resize(k);
  st.feature_std.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    st.feature_mean(j) = mean(static_cast<Eigen::Index>(st.kept_columns[j]));
    st.feature_std(j) = sds[j];
  }
  auto apply = [&](const Dataset& d) {
    MatrixXd x(d.n(), k);
    for (Eigen::Index j = 0; j < k; ++j) {
      x.col(j) = (d.X.col(static_cast<Eigen::Index>(st.kept_columns[j])).array() - st.feature_mean(j)) /
                 st.feature_std(j);
    }
    Dataset out(std::move(x), ((d.y.array() - st.target_mean) / st.target_std).matrix());
    for (std::size_t c : st.kept_columns) {
      out.feature_names.push_back(c < d.feature_names.size() ? d.feature_names[c] : "x" + std::to_string(c));
    }
    out.stats = st;
    return out;
  };
  return {apply(train), apply(test), st};
}

enum class SplitMode { random, sequential };

inline Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& idx) {
  MatrixXd x(static_cast<Eigen::Index>(idx.size()), d.p());
  VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.X.row(idx[i]);
    y(static_cast<Eigen::Index>(i)) = d.y(idx[i]);
  }
  Dataset out(std::move(x), std::move(y));
  out.feature_names = d.feature_names;
  return out;
}

/// Train fraction `ratio`; sequential keeps row order (first rows train), random shuffles
/// with a seeded generator.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double ratio, SplitMode mode, std::uint64_t seed = 0) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("split ratio must be in (0, 1)");
  const auto n = d.n();
  const auto n_train = static_cast<Eigen::Index>(std::llround(ratio * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw DataError("split leaves an empty train or test set");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (mode == SplitMode::random) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  const std::vector<Eigen::Index> tr(idx.begin(), idx.begin() + n_train);
  const std::vector<Eigen::Index> te(idx.begin() + n_train, idx.end());
  return {take_rows(d, tr), take_rows(d, te)};
}

}  // namespace sdridge
