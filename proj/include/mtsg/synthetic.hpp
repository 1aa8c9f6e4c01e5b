#ifndef MTSG_SYNTHETIC_HPP
#define MTSG_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtsg/metrics.hpp"
#include "mtsg/random.hpp"
#include "mtsg/tabular.hpp"

namespace mtsg {

struct SyntheticConfig {
  std::size_t rows = 300;
  std::size_t features = 20;
  std::size_t targets = 4;
  std::size_t latent = 3;
  double noise_ratio = 0.2;    // target noise SD as a fraction of the signal SD
  double feature_noise = 0.5;  // SD of the noise added to each observed feature
  std::uint64_t seed = 1;
};

/// Correlated multi-target data with known structure: features are noisy
/// linear views of a few latent factors; every target is a linear plus
/// quadratic function of the same factors plus Gaussian noise.
inline Dataset make_correlated_targets(const SyntheticConfig& cfg) {
  SplitMix64 rng(cfg.seed);
  const std::size_t n = cfg.rows, f = cfg.features, d = cfg.targets, k = cfg.latent;

  Matrix loadings(k, f);
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t c = 0; c < f; ++c) loadings(l, c) = rng.normal();
  Matrix linear(d, k), quadratic(d, k);
  for (std::size_t t = 0; t < d; ++t)
    for (std::size_t l = 0; l < k; ++l) {
      linear(t, l) = rng.normal();
      quadratic(t, l) = 0.5 * rng.normal();
    }

  Matrix z(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) z(i, l) = rng.normal();

  Dataset ds;
  ds.x = Matrix(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < f; ++c) {
      double v = 0.0;
      for (std::size_t l = 0; l < k; ++l) v += z(i, l) * loadings(l, c);
      ds.x(i, c) = v + cfg.feature_noise * rng.normal();
    }

  ds.y = Matrix(n, d);
  for (std::size_t t = 0; t < d; ++t) {
    std::vector<double> signal(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += linear(t, l) * z(i, l) + quadratic(t, l) * z(i, l) * z(i, l);
      signal[i] = s;
    }
    const double sd = metrics::sample_sd(signal);
    for (std::size_t i = 0; i < n; ++i) ds.y(i, t) = signal[i] + cfg.noise_ratio * sd * rng.normal();
  }
  for (std::size_t c = 0; c < f; ++c) ds.feature_names.push_back("x" + std::to_string(c + 1));
  for (std::size_t t = 0; t < d; ++t) ds.target_names.push_back("y" + std::to_string(t + 1));
  return ds;
}

}  // namespace mtsg

#endif  // MTSG_SYNTHETIC_HPP
