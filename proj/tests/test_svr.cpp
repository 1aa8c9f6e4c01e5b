#include <gtest/gtest.h>

#include <cmath>

#include "mtsg/svr.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using mtsg::KernelType;
using mtsg::Matrix;
using mtsg::SupportVectorRegression;
using mtsg::SvrParams;

namespace {

oracle::Mat gram(const Matrix& x, KernelType kernel, double gamma) {
  const std::size_t n = x.rows();
  oracle::Mat k(n, oracle::Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const long double v =
            kernel == KernelType::linear ? static_cast<long double>(x(i, c)) * x(j, c) : (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
        s += v;
      }
      k[i][j] = kernel == KernelType::linear ? static_cast<double>(s) : std::exp(-gamma * static_cast<double>(s));
    }
  return k;
}

struct Problem {
  Matrix x;
  std::vector<double> y;
};

Problem make_problem(std::uint64_t seed, std::size_t n, std::size_t f) {
  testutil::Rng rng(seed);
  Problem p{testutil::random_matrix(rng, n, f), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.5;
    for (std::size_t c = 0; c < f; ++c) s += std::sin(1.5 * p.x(i, c) + static_cast<double>(c));
    p.y[i] = s + 0.3 * rng.normal();
  }
  return p;
}

}  // namespace

class SvrOracle : public ::testing::TestWithParam<std::tuple<KernelType, std::uint64_t>> {};

TEST_P(SvrOracle, SmoReachesTheDenseQpOptimum) {
  const auto [kernel, seed] = GetParam();
  const auto prob = make_problem(seed, 24, 3);
  SvrParams params;
  params.c = 2.0;
  params.epsilon = 0.1;
  params.tolerance = 1e-7;
  SupportVectorRegression::Diagnostics diag;
  const auto model = SupportVectorRegression::fit(kernel, params, prob.x, prob.y, &diag);
  ASSERT_TRUE(diag.converged);

  const auto k = gram(prob.x, kernel, params.effective_gamma(3));
  const auto qp = oracle::solve_svr_dual(k, prob.y, params.c, params.epsilon);
  const std::size_t n = prob.y.size();
  const oracle::Vec a(diag.alpha.begin(), diag.alpha.begin() + static_cast<std::ptrdiff_t>(n));
  const oracle::Vec as(diag.alpha.begin() + static_cast<std::ptrdiff_t>(n), diag.alpha.end());
  const double smo_obj = oracle::svr_objective(k, prob.y, params.epsilon, a, as);
  EXPECT_NEAR(smo_obj, qp.objective, 1e-6 * std::max(1.0, std::abs(qp.objective)));

  // Dual feasibility of the SMO solution.
  double balance = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_GE(a[i], 0.0);
    EXPECT_LE(a[i], params.c);
    EXPECT_GE(as[i], 0.0);
    EXPECT_LE(as[i], params.c);
    balance += a[i] - as[i];
  }
  EXPECT_NEAR(balance, 0.0, 1e-10);

  // The decision function matches the oracle's on training and fresh rows.
  testutil::Rng rng(seed + 100);
  const Matrix fresh = testutil::random_matrix(rng, 10, 3);
  for (const Matrix* m : {&prob.x, &fresh}) {
    const auto got = model.predict(*m);
    for (std::size_t r = 0; r < m->rows(); ++r) {
      double want = qp.bias;
      for (std::size_t i = 0; i < n; ++i) {
        const double kv = kernel == KernelType::linear
                              ? [&] { double s = 0; for (std::size_t c = 0; c < 3; ++c) s += prob.x(i, c) * (*m)(r, c); return s; }()
                              : [&] { double s = 0; for (std::size_t c = 0; c < 3; ++c) s += (prob.x(i, c) - (*m)(r, c)) * (prob.x(i, c) - (*m)(r, c)); return std::exp(-params.effective_gamma(3) * s); }();
        want += qp.beta[i] * kv;
      }
      EXPECT_NEAR(got[r], want, 1e-3) << "row " << r;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Kernels, SvrOracle,
                         ::testing::Combine(::testing::Values(KernelType::linear, KernelType::rbf),
                                            ::testing::Values(1u, 2u, 3u)));

TEST(Svr, ConstantTargetGivesConstantPredictor) {
  const Matrix x{{0, 1}, {1, 0}, {2, 2}};
  const auto m = SupportVectorRegression::fit(KernelType::rbf, {}, x, std::vector<double>{3.5, 3.5, 3.5});
  EXPECT_EQ(m.support_count(), 0u);
  for (double v : m.predict(Matrix{{9, 9}, {-1, 4}})) EXPECT_EQ(v, 3.5);
}

TEST(Svr, WideEpsilonTubeLeavesNoSupportVectors) {
  const auto prob = make_problem(4, 20, 2);
  SvrParams p;
  p.epsilon = 100.0;
  const auto m = SupportVectorRegression::fit(KernelType::linear, p, prob.x, prob.y);
  EXPECT_EQ(m.support_count(), 0u);
}

TEST(Svr, LinearKernelRecoversLinearFunction) {
  testutil::Rng rng(6);
  const Matrix x = testutil::random_matrix(rng, 60, 2);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = 2.0 * x(i, 0) - x(i, 1) + 0.5;
  SvrParams p;
  p.c = 100.0;
  p.epsilon = 0.01;
  const auto m = SupportVectorRegression::fit(KernelType::linear, p, x, y);
  const auto pred = m.predict(Matrix{{0.3, -0.2}, {-0.5, 0.5}});
  EXPECT_NEAR(pred[0], 1.3, 0.02);
  EXPECT_NEAR(pred[1], -1.0, 0.02);
}

TEST(Svr, IterationBudgetIsReportedWhenExhausted) {
  const auto prob = make_problem(5, 40, 3);
  SvrParams p;
  p.c = 1000.0;
  p.epsilon = 0.0;
  p.tolerance = 1e-12;
  p.max_passes = 1;
  SupportVectorRegression::Diagnostics diag;
  SupportVectorRegression::fit(KernelType::rbf, p, prob.x, prob.y, &diag);
  EXPECT_FALSE(diag.converged);
  EXPECT_LE(diag.iterations, 2 * prob.y.size());
}

TEST(Svr, ValidatesParametersAndShapes) {
  const Matrix x{{0}, {1}};
  const std::vector<double> y{0, 1};
  SvrParams bad;
  bad.c = 0;
  EXPECT_THROW(SupportVectorRegression::fit(KernelType::linear, bad, x, y), mtsg::ParameterError);
  EXPECT_THROW(SupportVectorRegression::fit(KernelType::linear, {}, x, std::vector<double>{1}), mtsg::DataError);
  const auto m = SupportVectorRegression::fit(KernelType::linear, {}, x, y);
  EXPECT_THROW(m.predict(Matrix{{1, 2}}), mtsg::DataError);
}

TEST(Svr, JsonRoundTripPreservesPredictions) {
  const auto prob = make_problem(7, 30, 3);
  const auto m = SupportVectorRegression::fit(KernelType::rbf, {}, prob.x, prob.y);
  const auto back = SupportVectorRegression::from_json(nlohmann::json::parse(m.to_json().dump()), KernelType::rbf, {});
  EXPECT_EQ(back.predict(prob.x), m.predict(prob.x));
}
