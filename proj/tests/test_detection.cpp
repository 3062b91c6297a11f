#include <gtest/gtest.h>

#include <random>

#include "mumimo/detection.hpp"
#include "mumimo/verify.hpp"
#include "oracles.hpp"

using namespace mumimo;

TEST(ConjugateDetection, ScalarChannel) {
  ChannelSet c;
  c.dims = SystemDims::uniform(1, 1, 1, 1);
  c.per_user = {ComplexMatrix::Constant(1, 1, 2.0)};
  c.path_loss_db = {0.0};
  const auto d = decompose(c);
  const auto g = conjugate_detection(d);
  EXPECT_NEAR(std::abs(g.g(0)(0, 0)), 0.5, 1e-15);
  EXPECT_LT((g.assembled() * c.stacked() - d.v).norm(), 1e-15);
  EXPECT_EQ(g.kind, DetectionKind::Conjugate);
}

TEST(ConjugateDetection, RemovesUnusedSingularVectors) {
  std::mt19937_64 rng(51);
  for (int n = 0; n < 100; ++n) {
    const auto ch = verify::random_channels(rng, verify::random_dims(rng), 20.0);
    const auto d = decompose(ch);
    const ComplexMatrix gh = conjugate_detection(d).assembled() * ch.stacked();
    EXPECT_LT(oracle::rel(gh, d.v), 1e-10);
  }
}

TEST(ConjugateDetection, AssembledIsBlockDiagonal) {
  std::mt19937_64 rng(52);
  const auto ch = verify::random_channels(rng, SystemDims::uniform(3, 8, 3, 2));
  const auto g = conjugate_detection(decompose(ch)).assembled();
  ASSERT_EQ(g.rows(), 6);
  ASSERT_EQ(g.cols(), 9);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) {
      if (j == k) continue;
      EXPECT_EQ(g.block(2 * k, 3 * j, 2, 3).norm(), 0.0);
    }
  }
}

TEST(ConjugateDetection, EffectiveNoiseCovariance) {
  std::mt19937_64 rng(53);
  const auto d = decompose(verify::random_channels(rng, SystemDims::uniform(2, 8, 3, 2), 10.0));
  const double sigma2 = 0.7;
  const auto st = verify::effective_noise_stats(d, sigma2, 100000, 54);
  for (Index i = 0; i < st.covariance.rows(); ++i) {
    EXPECT_NEAR(st.covariance(i, i).real() / (sigma2 / (d.s(i) * d.s(i))), 1.0, 0.03);
    for (Index j = 0; j < st.covariance.cols(); ++j) {
      if (i == j) continue;
      const double se = std::sqrt(st.expected_diagonal(i) * st.expected_diagonal(j) / st.draws);
      EXPECT_LT(std::abs(st.covariance(i, j)), 4.0 * se);
    }
  }
}

TEST(MmseDetection, ScalarCase) {
  ChannelSet c;
  c.dims = SystemDims::uniform(1, 1, 1, 1);
  c.per_user = {ComplexMatrix::Constant(1, 1, 3.0)};
  c.path_loss_db = {0.0};
  const auto g = mmse_detection(c, ComplexMatrix::Identity(1, 1), 0.5);
  EXPECT_NEAR(g.g(0)(0, 0).real(), 3.0 / (9.0 + 0.5), 1e-15);
  EXPECT_NEAR(g.g(0)(0, 0).imag(), 0.0, 1e-15);
}

TEST(MmseDetection, MatchesOracleAndNormalEquations) {
  std::mt19937_64 rng(55);
  for (int n = 0; n < 30; ++n) {
    const auto ch = verify::random_channels(rng, verify::random_dims(rng), 10.0);
    const auto d = decompose(ch);
    const double sigma2 = 0.05 + 0.1 * n;
    const ComplexMatrix w = arzf(d, sigma2, 1.0).w;
    const auto g = mmse_detection(ch, w, sigma2);
    const auto ref = oracle::mmse(ch, w, sigma2);
    for (int k = 0; k < ch.dims.num_users; ++k) {
      const ComplexMatrix b = ch.h(k) * w.middleCols(ch.dims.layer_offset(k), ch.dims.layers_of(k));
      const ComplexMatrix m = b * b.adjoint() + sigma2 * ComplexMatrix::Identity(b.rows(), b.rows());
      EXPECT_LT((g.g(k) * m - b.adjoint()).norm() / b.norm(), 1e-10);
      EXPECT_LT(oracle::rel(g.g(k), ref[static_cast<std::size_t>(k)]), 1e-10);
    }
  }
}

TEST(MmseDetection, LargeNoiseLimit) {
  std::mt19937_64 rng(56);
  const auto ch = verify::random_channels(rng, SystemDims::uniform(2, 6, 3, 2));
  const auto d = decompose(ch);
  const ComplexMatrix w = mrt(d, 1.0).w;
  for (int k = 0; k < 2; ++k) {
    const ComplexMatrix b = ch.h(k) * w.middleCols(2 * k, 2);
    const double sigma2 = 1e6 * b.squaredNorm();
    const auto g = mmse_detection(ch, w, sigma2);
    const ComplexMatrix limit = b.adjoint() / sigma2;
    for (Index i = 0; i < limit.rows(); ++i) {
      for (Index j = 0; j < limit.cols(); ++j) {
        EXPECT_LE(std::abs(g.g(k)(i, j) - limit(i, j)), 0.01 * std::abs(limit(i, j)));
      }
    }
  }
}

TEST(MmseDetection, MinimizesMeanSquaredError) {
  // E‖G(Bx + n) − x‖² = ‖GB − I‖² + σ²‖G‖² for x ~ CN(0, I)
  std::mt19937_64 rng(57);
  for (int n = 0; n < 10; ++n) {
    const auto ch = verify::random_channels(rng, verify::random_dims(rng), 10.0);
    const auto d = decompose(ch);
    const double sigma2 = 0.3;
    const ComplexMatrix w = zf(d, Basis::V, 1.0).w;
    const auto g = mmse_detection(ch, w, sigma2);
    for (int k = 0; k < ch.dims.num_users; ++k) {
      const ComplexMatrix b = ch.h(k) * w.middleCols(ch.dims.layer_offset(k), ch.dims.layers_of(k));
      const auto mse = [&](const ComplexMatrix& gk) {
        return (gk * b - ComplexMatrix::Identity(b.cols(), b.cols())).squaredNorm() + sigma2 * gk.squaredNorm();
      };
      const double base = mse(g.g(k));
      for (int p = 0; p < 50; ++p) {
        ComplexMatrix delta = oracle::random_matrix(rng, g.g(k).rows(), g.g(k).cols());
        delta *= 1e-3 / delta.norm();
        EXPECT_GE(mse(g.g(k) + delta), base);
      }
    }
  }
}

TEST(MmseDetection, Errors) {
  std::mt19937_64 rng(58);
  const auto ch = verify::random_channels(rng, SystemDims::uniform(2, 6, 3, 2));
  const ComplexMatrix w = mrt(decompose(ch), 1.0).w;
  EXPECT_THROW(mmse_detection(ch, w, 0.0), Error);
  EXPECT_THROW(mmse_detection(ch, w.leftCols(3), 1.0), Error);
}
