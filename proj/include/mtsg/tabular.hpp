#ifndef MTSG_TABULAR_HPP
#define MTSG_TABULAR_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"

namespace mtsg {

/// n instances with f input features and d targets.
struct Dataset {
  Matrix x;
  Matrix y;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::size_t dropped_rows = 0;  // rows skipped at ingestion for missing cells

  std::size_t size() const noexcept { return x.rows(); }

  Dataset subset(std::span<const std::size_t> rows) const {
    return {x.select_rows(rows), y.select_rows(rows), feature_names, target_names, 0};
  }
};

namespace csv {

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?";
}

/// Parses a decimal number; "." is the only accepted decimal separator.
inline bool parse_double(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line of each row
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file '" + path + "'");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    for (auto& c : cells) c = std::string(trim(c));
    if (t.header.empty()) {
      if (line_no == 1 && cells[0].size() >= 3 && cells[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        cells[0].erase(0, 3);
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw DataError(path + ": missing header row");
  return t;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace csv

namespace detail {

inline Matrix numeric_block(const csv::Table& t, const std::string& path,
                            std::span<const std::size_t> cols,
                            std::span<const std::size_t> keep_rows) {
  Matrix m(keep_rows.size(), cols.size());
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    const auto& cells = t.rows[keep_rows[r]];
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string& cell = cells[cols[c]];
      double v;
      if (!csv::parse_double(cell, v))
        throw DataError(path + ":" + std::to_string(t.line_numbers[keep_rows[r]]) + ": column '" +
                        t.header[cols[c]] + "': non-numeric cell '" + cell + "'");
      m(r, c) = v;
    }
  }
  return m;
}

inline std::vector<std::size_t> complete_rows(const csv::Table& t, std::span<const std::size_t> cols) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    bool ok = true;
    for (std::size_t c : cols)
      if (csv::is_missing(t.rows[r][c])) ok = false;
    if (ok) keep.push_back(r);
  }
  return keep;
}

inline void check_unique(const std::vector<std::string>& names, const std::string& what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second) throw DataError("duplicate " + what + " column '" + n + "'");
}

}  // namespace detail

/// Reads a comma-separated table. Columns named in `target_names` become y
/// in that order; every other column becomes x in file order. Rows with a
/// missing cell are dropped and counted in `dropped_rows`.
inline Dataset load_csv(const std::string& path, const std::vector<std::string>& target_names) {
  const csv::Table t = csv::read(path);
  detail::check_unique(t.header, "header");
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < t.header.size(); ++i) pos[t.header[i]] = i;

  if (target_names.empty()) throw DataError("no target columns requested");
  std::vector<std::size_t> ycols;
  for (const auto& name : target_names) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError(path + ": unknown target '" + name + "'");
    ycols.push_back(it->second);
  }
  std::vector<std::size_t> xcols;
  Dataset ds;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (std::find(ycols.begin(), ycols.end(), i) != ycols.end()) continue;
    xcols.push_back(i);
    ds.feature_names.push_back(t.header[i]);
  }
  if (xcols.empty()) throw DataError(path + ": no feature columns left after removing targets");
  ds.target_names = target_names;
  detail::check_unique(ds.target_names, "target");

  std::vector<std::size_t> all(t.header.size());
  std::iota(all.begin(), all.end(), 0);
  const auto keep = detail::complete_rows(t, all);
  ds.dropped_rows = t.rows.size() - keep.size();
  if (keep.empty()) throw DataError(path + ": empty table after dropping rows with missing values");
  ds.x = detail::numeric_block(t, path, xcols, keep);
  ds.y = detail::numeric_block(t, path, ycols, keep);
  return ds;
}

/// Reads only the named columns (prediction-time input). Other columns,
/// including targets, are ignored.
inline Matrix load_features(const std::string& path, const std::vector<std::string>& feature_names) {
  const csv::Table t = csv::read(path);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < t.header.size(); ++i) pos[t.header[i]] = i;
  std::vector<std::size_t> cols;
  for (const auto& name : feature_names) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError(path + ": missing feature column '" + name + "'");
    cols.push_back(it->second);
  }
  const auto keep = detail::complete_rows(t, cols);
  return detail::numeric_block(t, path, cols, keep);
}

// ---------------------------------------------------------------------------
// Kennard-Stone

struct SplitIndices {
  std::vector<std::size_t> train;  // selection order
  std::vector<std::size_t> test;   // ascending
};

inline std::size_t train_size_for(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ParameterError("train fraction must lie in (0, 1], got " + csv::format_double(train_fraction));
  // Guard against 2/3 * 396 landing a hair above 264 in floating point.
  const double raw = train_fraction * static_cast<double>(n);
  const double rounded = std::round(raw);
  const double k = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
  // At least the two seed rows of the max-min selection are always taken.
  return std::min(n, std::max<std::size_t>(2, static_cast<std::size_t>(k)));
}

/// Greedy max-min selection. The first two rows are the farthest pair; each
/// further row is the unselected one whose nearest selected row is farthest.
/// Ties go to the lower row index.
inline SplitIndices kennard_stone_split(const Matrix& x, double train_fraction) {
  const std::size_t n = x.rows();
  if (n < 2) throw DataError("Kennard-Stone split needs at least 2 rows, got " + std::to_string(n));
  const std::size_t k = train_size_for(n, train_fraction);

  auto sqdist = [&](std::size_t a, std::size_t b) {
    auto ra = x.row(a);
    auto rb = x.row(b);
    double s = 0.0;
    for (std::size_t c = 0; c < ra.size(); ++c) {
      const double diff = ra[c] - rb[c];
      s += diff * diff;
    }
    return s;
  };

  std::size_t first = 0, second = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = sqdist(i, j);
      if (d > best) {
        best = d;
        first = i;
        second = j;
      }
    }

  SplitIndices out;
  out.train = {first, second};
  std::vector<char> selected(n, 0);
  selected[first] = selected[second] = 1;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    if (!selected[i]) nearest[i] = std::min(sqdist(i, first), sqdist(i, second));

  while (out.train.size() < k) {
    std::size_t pick = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!selected[i] && nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    selected[pick] = 1;
    out.train.push_back(pick);
    for (std::size_t i = 0; i < n; ++i)
      if (!selected[i]) nearest[i] = std::min(nearest[i], sqdist(i, pick));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!selected[i]) out.test.push_back(i);
  return out;
}

/// Two-column CSV: index,role with role in {train,test}. Train rows come
/// first in selection order.
inline void write_split_csv(const std::string& path, const SplitIndices& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "index,role\n";
  for (auto i : split.train) out << i << ",train\n";
  for (auto i : split.test) out << i << ",test\n";
}

inline SplitIndices read_split_csv(const std::string& path, std::size_t n_rows) {
  const csv::Table t = csv::read(path);
  if (t.header.size() != 2 || t.header[0] != "index" || t.header[1] != "role")
    throw DataError(path + ": expected header 'index,role'");
  SplitIndices s;
  std::vector<char> seen(n_rows, 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), idx);
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    if (ec != std::errc() || p != cells[0].data() + cells[0].size())
      throw DataError(where + ": bad index '" + cells[0] + "'");
    if (idx >= n_rows) throw DataError(where + ": index " + cells[0] + " out of range for " +
                                       std::to_string(n_rows) + " rows");
    if (seen[idx]) throw DataError(where + ": index " + cells[0] + " listed twice");
    seen[idx] = 1;
    if (cells[1] == "train")
      s.train.push_back(idx);
    else if (cells[1] == "test")
      s.test.push_back(idx);
    else
      throw DataError(where + ": role must be train or test, got '" + cells[1] + "'");
  }
  if (s.train.size() + s.test.size() != n_rows)
    throw DataError(path + ": split covers " + std::to_string(s.train.size() + s.test.size()) +
                    " rows, dataset has " + std::to_string(n_rows));
  return s;
}

// ---------------------------------------------------------------------------
// Auto-scaling

struct ScalingParams {
  std::vector<double> means;
  std::vector<double> stds;  // sample std (n-1); constant columns store 1

  std::size_t size() const noexcept { return means.size(); }
  friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

inline ScalingParams fit_autoscale(const Matrix& m) {
  if (m.rows() < 2) throw DataError("auto-scaling needs at least 2 rows, got " + std::to_string(m.rows()));
  ScalingParams p;
  p.means.assign(m.cols(), 0.0);
  p.stds.assign(m.cols(), 0.0);
  const double n = static_cast<double>(m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) sum += m(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double d = m(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    p.means[c] = mean;
    p.stds[c] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  return p;
}

inline Matrix apply_autoscale(const Matrix& m, const ScalingParams& p) {
  if (m.cols() != p.size())
    throw DataError("auto-scaling expects " + std::to_string(p.size()) + " columns, got " +
                    std::to_string(m.cols()));
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = (m(r, c) - p.means[c]) / p.stds[c];
  return out;
}

inline Matrix invert_autoscale(const Matrix& m, const ScalingParams& p) {
  if (m.cols() != p.size())
    throw DataError("inverse scaling expects " + std::to_string(p.size()) + " columns, got " +
                    std::to_string(m.cols()));
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) * p.stds[c] + p.means[c];
  return out;
}

}  // namespace mtsg

#endif  // MTSG_TABULAR_HPP
