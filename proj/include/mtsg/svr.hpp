#ifndef MTSG_SVR_HPP
#define MTSG_SVR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtsg/error.hpp"
#include "mtsg/matrix.hpp"

namespace mtsg {

enum class KernelType { linear, rbf };

struct SvrParams {
  double c = 1.0;
  double epsilon = 0.1;
  double gamma = 0.0;  // RBF width; 0 selects 1 / f
  double tolerance = 1e-3;
  std::size_t max_passes = 1000;  // iteration budget, in units of 2n working-set steps

  double effective_gamma(std::size_t features) const noexcept {
    return gamma > 0.0 ? gamma : 1.0 / static_cast<double>(std::max<std::size_t>(features, 1));
  }
  friend bool operator==(const SvrParams&, const SvrParams&) = default;
};

/// Epsilon-insensitive support vector regression.
///
/// The dual is solved over the 2n variables (alpha, alpha*) with a
/// two-coordinate SMO loop and second-order working-set selection. Training
/// stops once the maximal KKT violating pair is below `tolerance` or the
/// iteration budget runs out. The bias is averaged over free support vectors.
class SupportVectorRegression {
 public:
  struct Diagnostics {
    std::size_t iterations = 0;
    bool converged = false;
    double kkt_gap = 0.0;       // m(alpha) - M(alpha) at exit
    std::vector<double> alpha;  // 2n dual variables at exit
  };

  SupportVectorRegression() = default;

  static SupportVectorRegression fit(KernelType kernel, const SvrParams& params, const Matrix& x,
                                     std::span<const double> y, Diagnostics* diag = nullptr) {
    const std::size_t n = x.rows();
    if (n == 0) throw DataError("SVR: empty training data");
    if (n != y.size())
      throw DataError("SVR: " + std::to_string(n) + " rows but " + std::to_string(y.size()) + " targets");
    if (!(params.c > 0.0)) throw ParameterError("SVR: c must be positive");
    if (!(params.epsilon >= 0.0)) throw ParameterError("SVR: epsilon must be non-negative");
    if (!(params.tolerance > 0.0)) throw ParameterError("SVR: tolerance must be positive");
    if (params.gamma < 0.0) throw ParameterError("SVR: gamma must be positive");
    if (params.max_passes == 0) throw ParameterError("SVR: max_passes must be positive");

    SupportVectorRegression m;
    m.kernel_ = kernel;
    m.params_ = params;
    m.gamma_ = params.effective_gamma(x.cols());
    m.feature_count_ = x.cols();

    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
      m.bias_ = y[0];
      if (diag) *diag = {0, true, 0.0, std::vector<double>(2 * n, 0.0)};
      return m;
    }

    Solver solver(m, x, y);
    solver.run();
    std::vector<double> coef(n);
    for (std::size_t i = 0; i < n; ++i) coef[i] = solver.alpha[i] - solver.alpha[i + n];
    m.bias_ = -solver.rho;
    for (std::size_t i = 0; i < n; ++i) {
      if (coef[i] == 0.0) continue;
      m.coef_.push_back(coef[i]);
      auto r = x.row(i);
      m.support_.insert(m.support_.end(), r.begin(), r.end());
    }
    if (diag) *diag = {solver.iterations, solver.converged, solver.gap, solver.alpha};
    return m;
  }

  double predict_row(std::span<const double> row) const noexcept {
    double s = bias_;
    for (std::size_t k = 0; k < coef_.size(); ++k)
      s += coef_[k] * kernel_value({support_.data() + k * feature_count_, feature_count_}, row);
    return s;
  }

  std::vector<double> predict(const Matrix& x) const {
    if (x.cols() != feature_count_)
      throw DataError("SVR expects " + std::to_string(feature_count_) + " features, got " +
                      std::to_string(x.cols()));
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
    return out;
  }

  double kernel_value(std::span<const double> a, std::span<const double> b) const noexcept {
    double s = 0.0;
    if (kernel_ == KernelType::linear) {
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::exp(-gamma_ * s);
  }

  double bias() const noexcept { return bias_; }
  const std::vector<double>& coefficients() const noexcept { return coef_; }
  std::size_t support_count() const noexcept { return coef_.size(); }
  std::size_t feature_count() const noexcept { return feature_count_; }
  double gamma() const noexcept { return gamma_; }
  KernelType kernel() const noexcept { return kernel_; }

  nlohmann::json to_json() const {
    return {{"feature_count", feature_count_}, {"gamma", gamma_}, {"bias", bias_},
            {"coef", coef_},                   {"support", support_}};
  }

  static SupportVectorRegression from_json(const nlohmann::json& j, KernelType kernel,
                                           const SvrParams& params) {
    SupportVectorRegression m;
    m.kernel_ = kernel;
    m.params_ = params;
    m.feature_count_ = j.at("feature_count").get<std::size_t>();
    m.gamma_ = j.at("gamma").get<double>();
    m.bias_ = j.at("bias").get<double>();
    j.at("coef").get_to(m.coef_);
    j.at("support").get_to(m.support_);
    if (m.support_.size() != m.coef_.size() * m.feature_count_)
      throw DataError("SVR: corrupted support vector block");
    return m;
  }

 private:
  struct Solver {
    Solver(const SupportVectorRegression& model, const Matrix& x, std::span<const double> y)
        : m(model), x(x), n(x.rows()), l(2 * x.rows()), c(model.params_.c), eps(model.params_.tolerance) {
      alpha.assign(l, 0.0);
      grad.resize(l);
      sign.resize(l);
      for (std::size_t i = 0; i < n; ++i) {
        sign[i] = 1;
        sign[i + n] = -1;
        grad[i] = model.params_.epsilon - y[i];
        grad[i + n] = model.params_.epsilon + y[i];
      }
      diag.resize(n);
      for (std::size_t i = 0; i < n; ++i) diag[i] = m.kernel_value(x.row(i), x.row(i));
      if (n <= kMaxCachedRows) {
        gram.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i; j < n; ++j) gram[i * n + j] = gram[j * n + i] = m.kernel_value(x.row(i), x.row(j));
      }
      row_i.resize(n);
      row_j.resize(n);
    }

    static constexpr std::size_t kMaxCachedRows = 4000;
    static constexpr double kTau = 1e-12;

    // Unsigned kernel row of training point (v mod n).
    void kernel_row(std::size_t v, std::vector<double>& out) const {
      const std::size_t p = v % n;
      if (!gram.empty()) {
        std::copy(gram.begin() + static_cast<std::ptrdiff_t>(p * n),
                  gram.begin() + static_cast<std::ptrdiff_t>((p + 1) * n), out.begin());
        return;
      }
      for (std::size_t q = 0; q < n; ++q) out[q] = m.kernel_value(x.row(p), x.row(q));
    }

    bool upper(std::size_t t) const { return alpha[t] >= c; }
    bool lower(std::size_t t) const { return alpha[t] <= 0.0; }
    double qd(std::size_t t) const { return diag[t % n]; }
    // Signed Q entry between variable a and variable b given a's kernel row.
    double q(const std::vector<double>& krow_a, std::size_t a, std::size_t b) const {
      return static_cast<double>(sign[a] * sign[b]) * krow_a[b % n];
    }

    // Returns false when optimal within tolerance.
    bool select(std::size_t& out_i, std::size_t& out_j) {
      double gmax = -std::numeric_limits<double>::infinity();
      std::size_t i = l;
      for (std::size_t t = 0; t < l; ++t) {
        if (sign[t] == 1) {
          if (!upper(t) && -grad[t] >= gmax) {
            gmax = -grad[t];
            i = t;
          }
        } else if (!lower(t) && grad[t] >= gmax) {
          gmax = grad[t];
          i = t;
        }
      }
      if (i == l) {
        gap = 0.0;
        return false;
      }
      kernel_row(i, row_i);
      double gmax2 = -std::numeric_limits<double>::infinity();
      double best = std::numeric_limits<double>::infinity();
      std::size_t j = l;
      for (std::size_t t = 0; t < l; ++t) {
        if (sign[t] == 1) {
          if (lower(t)) continue;
          const double gd = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (gd > 0) {
            double quad = qd(i) + qd(t) - 2.0 * sign[i] * q(row_i, i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(gd * gd) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        } else {
          if (upper(t)) continue;
          const double gd = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
          if (gd > 0) {
            double quad = qd(i) + qd(t) + 2.0 * sign[i] * q(row_i, i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(gd * gd) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        }
      }
      gap = gmax + gmax2;
      if (gap < eps || j == l) return false;
      out_i = i;
      out_j = j;
      return true;
    }

    void step(std::size_t i, std::size_t j) {
      kernel_row(j, row_j);
      const double old_i = alpha[i];
      const double old_j = alpha[j];
      const double qij = q(row_i, i, j);
      if (sign[i] != sign[j]) {
        double quad = qd(i) + qd(j) + 2.0 * qij;
        if (quad <= 0) quad = kTau;
        const double delta = (-grad[i] - grad[j]) / quad;
        const double diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if (diff > 0) {
          if (alpha[j] < 0) {
            alpha[j] = 0;
            alpha[i] = diff;
          }
        } else if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = -diff;
        }
        if (diff > 0) {
          if (alpha[i] > c) {
            alpha[i] = c;
            alpha[j] = c - diff;
          }
        } else if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = c + diff;
        }
      } else {
        double quad = qd(i) + qd(j) - 2.0 * qij;
        if (quad <= 0) quad = kTau;
        const double delta = (grad[i] - grad[j]) / quad;
        const double sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if (sum > c) {
          if (alpha[i] > c) {
            alpha[i] = c;
            alpha[j] = sum - c;
          }
        } else if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = sum;
        }
        if (sum > c) {
          if (alpha[j] > c) {
            alpha[j] = c;
            alpha[i] = sum - c;
          }
        } else if (alpha[i] < 0) {
          alpha[i] = 0;
          alpha[j] = sum;
        }
      }
      const double di = alpha[i] - old_i;
      const double dj = alpha[j] - old_j;
      for (std::size_t t = 0; t < l; ++t) grad[t] += q(row_i, i, t) * di + q(row_j, j, t) * dj;
    }

    void run() {
      const std::size_t budget = m.params_.max_passes * l;
      std::size_t i = 0, j = 0;
      while (iterations < budget) {
        if (!select(i, j)) {
          converged = true;
          break;
        }
        step(i, j);
        ++iterations;
      }
      if (!converged) {
        std::size_t a, b;
        converged = !select(a, b);
      }
      compute_rho();
    }

    void compute_rho() {
      double ub = std::numeric_limits<double>::infinity();
      double lb = -std::numeric_limits<double>::infinity();
      double sum_free = 0.0;
      std::size_t free = 0;
      for (std::size_t t = 0; t < l; ++t) {
        const double yg = sign[t] * grad[t];
        if (upper(t)) {
          if (sign[t] == -1)
            ub = std::min(ub, yg);
          else
            lb = std::max(lb, yg);
        } else if (lower(t)) {
          if (sign[t] == 1)
            ub = std::min(ub, yg);
          else
            lb = std::max(lb, yg);
        } else {
          ++free;
          sum_free += yg;
        }
      }
      rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
    }

    const SupportVectorRegression& m;
    const Matrix& x;
    std::size_t n, l;
    double c, eps;
    std::vector<double> alpha, grad, diag, gram, row_i, row_j;
    std::vector<int> sign;
    std::size_t iterations = 0;
    bool converged = false;
    double gap = 0.0;
    double rho = 0.0;
  };

  KernelType kernel_ = KernelType::rbf;
  SvrParams params_;
  double gamma_ = 1.0;
  std::size_t feature_count_ = 0;
  double bias_ = 0.0;
  std::vector<double> coef_;
  std::vector<double> support_;  // row-major, coef_.size() x feature_count_
};

}  // namespace mtsg

#endif  // MTSG_SVR_HPP
