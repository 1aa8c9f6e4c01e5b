#ifndef MTSG_TESTS_ORACLES_HPP
#define MTSG_TESTS_ORACLES_HPP

// Reference implementations used only by the tests. They are written
// from the definitions, favour clarity over speed and share no code with
// the library (long double accumulation, different loop structure).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // row-major, rows of equal length

inline double rmse(const Vec& a, const Vec& p) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<long double>(a[i]) - p[i]) * (static_cast<long double>(a[i]) - p[i]);
  return static_cast<double>(std::sqrt(s / a.size()));
}

inline double mean(const Vec& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / v.size());
}

// RRMSE of one target against the constant predictor at the mean of `a`.
inline double rrmse(const Vec& a, const Vec& p) {
  const long double m = mean(a);
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (static_cast<long double>(a[i]) - p[i]) * (static_cast<long double>(a[i]) - p[i]);
    den += (a[i] - m) * (a[i] - m);
  }
  return static_cast<double>(std::sqrt(num) / std::sqrt(den));
}

// Columns given as a list of per-target vectors.
inline double arrmse(const Mat& actual_cols, const Mat& pred_cols) {
  long double s = 0;
  for (std::size_t t = 0; t < actual_cols.size(); ++t) s += rrmse(actual_cols[t], pred_cols[t]);
  return static_cast<double>(s / actual_cols.size());
}

inline double sd(const Vec& v) {
  const long double m = mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(std::sqrt(s / (v.size() - 1)));
}

// Textbook single-pass form, deliberately different from the library's
// centred two-pass computation.
inline double pearson(const Vec& a, const Vec& b) {
  const long double n = a.size();
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += static_cast<long double>(a[i]) * a[i];
    sbb += static_cast<long double>(b[i]) * b[i];
    sab += static_cast<long double>(a[i]) * b[i];
  }
  const long double num = n * sab - sa * sb;
  const long double den = std::sqrt(n * saa - sa * sa) * std::sqrt(n * sbb - sb * sb);
  return static_cast<double>(std::clamp(num / den, -1.0L, 1.0L));
}

// ---------------------------------------------------------------------------
// Kennard-Stone, straight from the definition: the farthest pair first,
// then repeatedly the candidate maximising its minimum distance to every
// already chosen row. The minimum is recomputed from scratch each round.
// Ties resolve to the lexicographically smallest index (pair or row).

inline long double sq_dist(const Mat& x, std::size_t a, std::size_t b) {
  long double s = 0;
  for (std::size_t c = 0; c < x[a].size(); ++c) {
    const long double d = static_cast<long double>(x[a][c]) - x[b][c];
    s += d * d;
  }
  return s;
}

inline std::vector<std::size_t> kennard_stone(const Mat& x, std::size_t k) {
  const std::size_t n = x.size();
  std::vector<std::size_t> chosen;
  long double best = -1;
  std::size_t bi = 0, bj = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i < j && sq_dist(x, i, j) > best) {
        best = sq_dist(x, i, j);
        bi = i;
        bj = j;
      }
  chosen = {bi, bj};
  while (chosen.size() < k) {
    long double far = -1;
    std::size_t pick = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      long double nearest = std::numeric_limits<long double>::infinity();
      for (std::size_t s : chosen) nearest = std::min(nearest, sq_dist(x, c, s));
      if (nearest > far) {
        far = nearest;
        pick = c;
      }
    }
    chosen.push_back(pick);
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// Epsilon-SVR dual solved as a dense QP by accelerated projected gradient.
//
// Variables v = (a, a*) in [0, C]^{2n} with sum(a) - sum(a*) = 0, objective
//   1/2 (a - a*)' K (a - a*) + eps * sum(a + a*) - y' (a - a*).
// The feasible set is a box cut by one hyperplane; projecting onto it is a
// one-dimensional monotone root find over the hyperplane multiplier.

struct QpSolution {
  Vec beta;  // a - a*
  double bias = 0.0;
  double objective = 0.0;
};

inline double svr_objective(const Mat& k, const Vec& y, double eps, const Vec& a, const Vec& as) {
  const std::size_t n = y.size();
  long double quad = 0, lin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double bi = a[i] - as[i];
    for (std::size_t j = 0; j < n; ++j) quad += bi * k[i][j] * (a[j] - as[j]);
    lin += eps * (a[i] + as[i]) - y[i] * bi;
  }
  return static_cast<double>(0.5L * quad + lin);
}

inline void project(Vec& a, Vec& as, double c) {
  const std::size_t n = a.size();
  auto clip = [c](double v) { return std::clamp(v, 0.0, c); };
  // g(lambda) = sum clip(a - lambda) - sum clip(as + lambda) decreases in lambda.
  auto g = [&](double lambda) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += clip(a[i] - lambda) - clip(as[i] + lambda);
    return static_cast<double>(s);
  };
  double lo = -1.0, hi = 1.0;
  while (g(lo) < 0) lo *= 2;
  while (g(hi) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = clip(a[i] - lambda);
    as[i] = clip(as[i] + lambda);
  }
}

inline QpSolution solve_svr_dual(const Mat& k, const Vec& y, double c, double eps, int iterations = 40000) {
  const std::size_t n = y.size();
  // Largest eigenvalue of K by power iteration; the 2n Hessian has 2x that.
  Vec v(n, 1.0);
  double lmax = 1.0;
  for (int it = 0; it < 500; ++it) {
    Vec w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += k[i][j] * v[j];
    double norm = 0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0) break;
    lmax = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  const double step = 1.0 / (2.0 * lmax * 1.01);

  Vec a(n, 0.0), as(n, 0.0), za = a, zas = as;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    Vec ga(n), gas(n);
    for (std::size_t i = 0; i < n; ++i) {
      long double kb = 0;
      for (std::size_t j = 0; j < n; ++j) kb += k[i][j] * (za[j] - zas[j]);
      ga[i] = static_cast<double>(kb) + eps - y[i];
      gas[i] = -static_cast<double>(kb) + eps + y[i];
    }
    Vec na(n), nas(n);
    for (std::size_t i = 0; i < n; ++i) {
      na[i] = za[i] - step * ga[i];
      nas[i] = zas[i] - step * gas[i];
    }
    project(na, nas, c);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) {
      za[i] = na[i] + (t - 1.0) / tn * (na[i] - a[i]);
      zas[i] = nas[i] + (t - 1.0) / tn * (nas[i] - as[i]);
    }
    a = na;
    as = nas;
    t = tn;
  }

  QpSolution sol;
  sol.beta.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.beta[i] = a[i] - as[i];
  sol.objective = svr_objective(k, y, eps, a, as);
  // Bias from the free variables' KKT equalities.
  long double bsum = 0;
  std::size_t free = 0;
  const double margin = 1e-6 * c;
  for (std::size_t i = 0; i < n; ++i) {
    long double kb = 0;
    for (std::size_t j = 0; j < n; ++j) kb += k[i][j] * sol.beta[j];
    if (a[i] > margin && a[i] < c - margin) {
      bsum += y[i] - eps - kb;
      ++free;
    }
    if (as[i] > margin && as[i] < c - margin) {
      bsum += y[i] + eps - kb;
      ++free;
    }
  }
  sol.bias = free ? static_cast<double>(bsum / free) : std::numeric_limits<double>::quiet_NaN();
  return sol;
}

}  // namespace oracle

#endif  // MTSG_TESTS_ORACLES_HPP
