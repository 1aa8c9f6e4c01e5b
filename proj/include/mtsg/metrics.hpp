#ifndef MTSG_METRICS_HPP
#define MTSG_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"

namespace mtsg::metrics {

inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size())
    throw DataError("rmse: length mismatch " + std::to_string(actual.size()) + " vs " +
                    std::to_string(predicted.size()));
  if (actual.empty()) throw DataError("rmse: empty vectors");
  double ss = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(actual.size()));
}

/// Relative performance per target: above 1 means the multi-target model
/// beat its single-target counterpart.
inline double rpt(double rmse_st, double rmse_mtr) {
  if (!(rmse_st > 0.0) || !(rmse_mtr > 0.0))
    throw DataError("rpt: RMSE values must be positive");
  return rmse_st / rmse_mtr;
}

/// Squared-error sums behind one target's RRMSE.
struct RrmseTerms {
  double sse = 0.0;  // sum (y - yhat)^2
  double sst = 0.0;  // sum (y - mean(y))^2, mean over the evaluation rows
  double rrmse() const { return std::sqrt(sse / sst); }
};

inline RrmseTerms rrmse_terms(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw DataError("rrmse: length mismatch");
  if (actual.empty()) throw DataError("rrmse: empty vectors");
  double mean = 0.0;
  for (double v : actual) mean += v;
  mean /= static_cast<double>(actual.size());
  RrmseTerms t;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    const double dv = actual[i] - mean;
    t.sse += e * e;
    t.sst += dv * dv;
  }
  return t;
}

/// Average relative RMSE over targets. Each target's error is normalised by
/// the spread of its actual values around their evaluation-set mean.
inline double arrmse(const Matrix& actual, const Matrix& predicted,
                     const std::vector<std::string>& target_names = {}) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
    throw DataError("arrmse: shape mismatch");
  if (actual.cols() == 0 || actual.rows() == 0) throw DataError("arrmse: empty matrices");
  double total = 0.0;
  for (std::size_t t = 0; t < actual.cols(); ++t) {
    const auto a = actual.column(t);
    const auto p = predicted.column(t);
    const RrmseTerms terms = rrmse_terms(a, p);
    if (!(terms.sst > 0.0)) {
      const std::string name = t < target_names.size() ? target_names[t] : "#" + std::to_string(t);
      throw DataError("arrmse: target '" + name + "' is constant over the evaluation set");
    }
    total += terms.rrmse();
  }
  return total / static_cast<double>(actual.cols());
}

/// Ratio of performance to deviation. A perfect prediction yields +inf.
inline double rpd(double reference_sd, double rmse_value) {
  if (!(reference_sd > 0.0)) throw DataError("rpd: reference SD must be positive");
  if (rmse_value < 0.0) throw DataError("rpd: RMSE must be non-negative");
  if (rmse_value == 0.0) return std::numeric_limits<double>::infinity();
  return reference_sd / rmse_value;
}

enum class RpdBand { very_poor, poor, fair, good, very_good, excellent };

inline const char* to_string(RpdBand b) {
  switch (b) {
    case RpdBand::very_poor: return "very_poor";
    case RpdBand::poor: return "poor";
    case RpdBand::fair: return "fair";
    case RpdBand::good: return "good";
    case RpdBand::very_good: return "very_good";
    case RpdBand::excellent: return "excellent";
  }
  return "?";
}

inline std::optional<RpdBand> parse_rpd_band(const std::string& s) {
  for (auto b : {RpdBand::very_poor, RpdBand::poor, RpdBand::fair, RpdBand::good, RpdBand::very_good,
                 RpdBand::excellent})
    if (s == to_string(b)) return b;
  return std::nullopt;
}

// Left-closed bands: [1.0,1.4) poor, [1.4,1.8) fair, [1.8,2.0) good,
// [2.0,2.5) very good, >= 2.5 excellent.
inline RpdBand rpd_band(double value) {
  if (!(value > 0.0)) throw DataError("rpd_band: value must be positive");
  if (value < 1.0) return RpdBand::very_poor;
  if (value < 1.4) return RpdBand::poor;
  if (value < 1.8) return RpdBand::fair;
  if (value < 2.0) return RpdBand::good;
  if (value < 2.5) return RpdBand::very_good;
  return RpdBand::excellent;
}

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw DataError("standard deviation needs at least 2 values");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Pairwise Pearson correlation between the columns of y.
inline Matrix pearson_matrix(const Matrix& y, const std::vector<std::string>& names = {}) {
  const std::size_t n = y.rows();
  const std::size_t d = y.cols();
  if (n < 2) throw DataError("pearson_matrix needs at least 2 rows");
  std::vector<std::vector<double>> centered(d);
  std::vector<double> norm(d);
  for (std::size_t c = 0; c < d; ++c) {
    centered[c] = y.column(c);
    double mean = 0.0;
    for (double v : centered[c]) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double& v : centered[c]) {
      v -= mean;
      ss += v * v;
    }
    if (!(ss > 0.0)) {
      const std::string name = c < names.size() ? names[c] : "#" + std::to_string(c);
      throw DataError("pearson_matrix: column '" + name + "' is constant");
    }
    norm[c] = std::sqrt(ss);
  }
  Matrix r(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    r(a, a) = 1.0;
    for (std::size_t b = a + 1; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centered[a][i] * centered[b][i];
      const double v = std::clamp(s / (norm[a] * norm[b]), -1.0, 1.0);
      r(a, b) = r(b, a) = v;
    }
  }
  return r;
}

}  // namespace mtsg::metrics

#endif  // MTSG_METRICS_HPP
