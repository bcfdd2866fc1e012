// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the tests. Nothing here calls
// into the library beyond the Mat type.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "pisces/numerics.hpp"

namespace oracle {

using pisces::Mat;
using pisces::Vec;

inline Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (double& x : m.data) x = u(rng);
  return m;
}

inline Mat random_stochastic(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Mat m = random_mat(r, c, rng, 0.05, 1.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += m(i, j);
    for (std::size_t j = 0; j < c; ++j) m(i, j) /= s;
  }
  return m;
}

// Direct summation in long double.
inline long double logsumexp_ld(const Vec& v) {
  long double s = 0.0L;
  for (double x : v) s += std::exp(static_cast<long double>(x));
  return std::log(s);
}

// Minimum over permutation plans of (1/n) sum_i C(i, sigma(i)).
inline double best_permutation_cost(const Mat& c) {
  std::vector<std::size_t> p(c.rows);
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < c.rows; ++i) s += c(i, p[i]);
    best = std::min(best, s / static_cast<double>(c.rows));
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

inline double loop_sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline double central_diff(const std::function<double()>& f, double& x, double h) {
  const double x0 = x;
  x = x0 + h;
  const double fp = f();
  x = x0 - h;
  const double fm = f();
  x = x0;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

}  // namespace oracle
