// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "pisces/fusion.hpp"
#include "support.hpp"

using namespace pisces;

TEST(Fuse, UniformPlanIsNeutral) {
  std::mt19937_64 rng(1);
  const Mat a = oracle::random_stochastic(3, 6, rng);
  const double eps = 1e-8;
  const Mat f = fuse(a, Mat(3, 6, 1.0 / 18.0), eps).attn;
  for (std::size_t i = 0; i < 3; ++i) {
    double tv = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(f(i, j), (a(i, j) + eps) / (1.0 + 6 * eps), 1e-15);
      tv += std::abs(f(i, j) - a(i, j));
    }
    EXPECT_LE(0.5 * tv, 6 * eps);
  }
}

TEST(Fuse, OneHotPlanConcentrates) {
  const std::size_t m = 5;
  Mat a(2, m, 1.0 / m), p(2, m);
  p(0, 3) = 1.0;
  p(1, 0) = 1.0;
  const double eps = 1e-8;
  const Mat f = fuse(a, p, eps).attn;
  // (1/M + e)(1 + e) against (M - 1) (1/M + e) e in the row sum
  const double on = (1.0 + eps) / ((1.0 + eps) + (m - 1) * eps);
  EXPECT_NEAR(f(0, 3), on, 1e-15);
  EXPECT_NEAR(f(0, 3), 1.0, 1e-6);
  EXPECT_NEAR(f(1, 0), 1.0, 1e-6);
  EXPECT_NEAR(f(0, 1), 0.0, 1e-6);
}

TEST(Fuse, SelfPlanRanksLikeSquares) {
  std::mt19937_64 rng(2);
  const Mat a = oracle::random_stochastic(4, 7, rng);
  const Mat f = fuse(a, a).attn;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      for (std::size_t k = 0; k < 7; ++k)
        if (a(i, j) * a(i, j) < a(i, k) * a(i, k)) {
          EXPECT_LT(f(i, j), f(i, k));
        }
}

TEST(Fuse, RowStochasticOnRandomInputs) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + t % 5, m = 1 + (t / 5) % 9;
    const Mat a = oracle::random_stochastic(n, m, rng), p = oracle::random_mat(n, m, rng, 0.0, 0.3);
    const Mat f = fuse(a, p).attn;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double v : f.row(i)) {
        ASSERT_GE(v, 0.0);
        s += v;
      }
      ASSERT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Fuse, Errors) {
  EXPECT_THROW(fuse(Mat(2, 3), Mat(3, 2)), Error);
  EXPECT_THROW(fuse(Mat(2, 2, 0.5), Mat(2, 2, 0.25), 0.0), Error);
}

TEST(Fuse, JvpMatchesDirectionalDifference) {
  std::mt19937_64 rng(4);
  const Mat a = oracle::random_stochastic(3, 5, rng), p = oracle::random_stochastic(3, 5, rng);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      Mat dir(3, 5);
      dir(i, j) = 1.0;
      const Mat jv = fuse_jvp(a, p, dir);
      Mat ap = a, am = a;
      ap(i, j) += h;
      am(i, j) -= h;
      const Mat fp = fuse(ap, p).attn, fm = fuse(am, p).attn;
      for (std::size_t k = 0; k < 15; ++k) {
        const double fd = (fp.data[k] - fm.data[k]) / (2 * h);
        EXPECT_LT(oracle::rel_err(fd, jv.data[k], 1e-6), 1e-4);
      }
    }
}

TEST(Fuse, VjpIsAdjointOfJvp) {
  std::mt19937_64 rng(5);
  const Mat a = oracle::random_stochastic(3, 4, rng), p = oracle::random_stochastic(3, 4, rng);
  const Mat u = oracle::random_mat(3, 4, rng), v = oracle::random_mat(3, 4, rng);
  const Mat jv = fuse_jvp(a, p, v), vj = fuse_vjp(a, p, u);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t k = 0; k < 12; ++k) {
    lhs += u.data[k] * jv.data[k];
    rhs += vj.data[k] * v.data[k];
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(FusedPool, Examples) {
  std::mt19937_64 rng(6);
  const Mat x = oracle::random_mat(4, 3, rng);
  FusedAttention oh{Mat(2, 4), 1e-8};
  oh.attn(0, 2) = 1.0;
  oh.attn(1, 0) = 1.0;
  const Mat o = fused_pool(oh, x);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(o(0, k), x(2, k));
    EXPECT_EQ(o(1, k), x(0, k));
  }
  const Mat c = fused_pool({Mat(2, 4, 0.25), 1e-8}, x);
  for (std::size_t k = 0; k < 3; ++k) {
    const double mean = (x(0, k) + x(1, k) + x(2, k) + x(3, k)) / 4.0;
    EXPECT_NEAR(c(0, k), mean, 1e-15);
    EXPECT_NEAR(c(1, k), mean, 1e-15);
  }
  const Mat a = oracle::random_stochastic(3, 4, rng);
  const Mat r = fused_pool({a, 1e-8}, x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < 4; ++j) s += a(i, j) * x(j, k);
      EXPECT_NEAR(r(i, k), s, 1e-12);
    }
  EXPECT_THROW(fused_pool({Mat(2, 3), 1e-8}, x), Error);
}
