// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices and the stable log/softmax primitives shared by the
// solvers, reward pipeline and training loops. Everything is 64-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pisces/error.hpp"

namespace pisces {

using Vec = std::vector<double>;

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
    Mat m;
    m.rows = rows_in.size();
    m.cols = m.rows ? rows_in.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows_in) {
      require(r.size() == m.cols, ErrorKind::data, "shape-mismatch", "ragged row list");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  Vec row_vec(std::size_t i) const { return Vec(row(i).begin(), row(i).end()); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Mat&, const Mat&) = default;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  require(a.same_shape(b), ErrorKind::data, "shape-mismatch",
          std::string(what) + ": " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
              std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double logsumexp(std::span<const double> v) {
  require(!v.empty(), ErrorKind::data, "empty-input", "logsumexp of empty vector");
  const double hi = *std::max_element(v.begin(), v.end());
  if (std::isinf(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::data, "shape-mismatch", "cosine of unequal dims");
  const double na = norm(a), nb = norm(b);
  require(na > 0.0 && nb > 0.0, ErrorKind::numeric, "degenerate-vector", "zero-norm input to cosine");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// d cos(a, b) / d b.
inline Vec cosine_grad_b(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  require(na > 0.0 && nb > 0.0, ErrorKind::numeric, "degenerate-vector", "zero-norm input to cosine");
  const double c = dot(a, b) / (na * nb);
  Vec g(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) g[i] = a[i] / (na * nb) - c * b[i] / (nb * nb);
  return g;
}

inline Vec softmax(std::span<const double> v) {
  require(!v.empty(), ErrorKind::data, "empty-input", "softmax of empty vector");
  const double hi = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (out[i] = std::exp(v[i] - hi));
  for (double& x : out) x /= s;
  return out;
}

// Entry (i, j) = ||a_i - b_j||^2 via the norm expansion, clamped at 0.
inline Mat pairwise_sq_dist(const Mat& a, const Mat& b) {
  require(a.cols == b.cols, ErrorKind::data, "shape-mismatch", "pairwise_sq_dist column counts differ");
  Vec na(a.rows), nb(b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) na[i] = dot(a.row(i), a.row(i));
  for (std::size_t j = 0; j < b.rows; ++j) nb[j] = dot(b.row(j), b.row(j));
  Mat d(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j)
      d(i, j) = std::max(0.0, na[i] + nb[j] - 2.0 * dot(a.row(i), b.row(j)));
  return d;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols == b.rows, ErrorKind::data, "shape-mismatch", "matmul inner dims differ");
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

// Maps values affinely onto [0, 1]; a constant input maps to all zeros.
inline void range_normalize(std::span<double> v) {
  if (v.empty()) return;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, span = *hi - *lo;
  if (!(span > 0.0)) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = std::clamp((x - a) / span, 0.0, 1.0);
}

}  // namespace pisces
