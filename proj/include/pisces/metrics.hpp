// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Alignment diagnostics: mutual k-nearest-neighbour overlap, Spearman rank
// correlation of pairwise distances, and pairwise-distance histograms.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/io.hpp"
#include "pisces/numerics.hpp"

namespace pisces {

namespace detail {

// Indices of the k nearest rows to row i (excluding i), ties broken by index.
inline std::vector<std::size_t> knn_of_row(const Mat& dist, std::size_t i, std::size_t k) {
  std::vector<std::size_t> idx;
  idx.reserve(dist.cols - 1);
  for (std::size_t j = 0; j < dist.cols; ++j)
    if (j != i) idx.push_back(j);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist(i, a) < dist(i, b) || (dist(i, a) == dist(i, b) && a < b);
                    });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Condensed upper-triangle pairwise Euclidean distances.
inline Vec pairwise_distances(const Mat& x) {
  const Mat d2 = pairwise_sq_dist(x, x);
  Vec out;
  out.reserve(x.rows * (x.rows - 1) / 2);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i + 1; j < x.rows; ++j) out.push_back(std::sqrt(d2(i, j)));
  return out;
}

// 1-based ranks, ties share their average rank.
inline Vec average_ranks(const Vec& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vec ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const Vec& a, const Vec& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw Error(ErrorKind::numeric, "degenerate-ranks", "all distances are equal");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace detail

// Mean fraction of shared k-nearest neighbours; row i of `a` is paired with
// row i of `b`, and neighbours are searched within each set.
inline double mutual_knn(const Mat& a, const Mat& b, std::size_t k) {
  require(a.rows == b.rows, ErrorKind::data, "shape-mismatch", "mutual_knn needs paired rows");
  require(k >= 1 && k < a.rows, ErrorKind::usage, "invalid-k", "need 1 <= k < n");
  const Mat da = pairwise_sq_dist(a, a), db = pairwise_sq_dist(b, b);
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto na = detail::knn_of_row(da, i, k), nb = detail::knn_of_row(db, i, k);
    std::vector<std::size_t> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / static_cast<double>(k);
  }
  return total / static_cast<double>(a.rows);
}

inline double spearman_pairwise(const Mat& before, const Mat& after) {
  require(before.rows == after.rows, ErrorKind::data, "shape-mismatch", "spearman needs paired rows");
  require(before.rows >= 3, ErrorKind::usage, "too-few-points", "spearman needs n >= 3");
  const Vec ra = detail::average_ranks(detail::pairwise_distances(before));
  const Vec rb = detail::average_ranks(detail::pairwise_distances(after));
  return detail::pearson(ra, rb);
}

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
  double bin_lo(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(counts.size()); }
  double bin_hi(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(counts.size()); }
};

// Distances outside [lo, hi) are counted in the first or last bin so the
// total always equals n(n-1)/2.
inline Histogram distance_histogram(const Mat& x, std::size_t bins, double lo, double hi) {
  require(bins >= 1, ErrorKind::usage, "invalid-range", "bins must be >= 1");
  require(lo < hi && std::isfinite(lo) && std::isfinite(hi), ErrorKind::usage, "invalid-range", "need lo < hi");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double d : detail::pairwise_distances(x)) {
    const double pos = std::floor((d - lo) / width);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[b];
  }
  return h;
}

inline double total_variation(const Histogram& a, const Histogram& b) {
  require(a.counts.size() == b.counts.size() && a.lo == b.lo && a.hi == b.hi, ErrorKind::data, "shape-mismatch",
          "histograms must share bin edges");
  const double ta = static_cast<double>(a.total()), tb = static_cast<double>(b.total());
  double s = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i)
    s += std::abs(static_cast<double>(a.counts[i]) / ta - static_cast<double>(b.counts[i]) / tb);
  return 0.5 * s;
}

// Energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| between two samples.
inline double energy_distance(const Mat& x, const Mat& y) {
  require(x.cols == y.cols && x.rows > 0 && y.rows > 0, ErrorKind::data, "shape-mismatch", "energy distance dims");
  auto mean_dist = [](const Mat& a, const Mat& b) {
    const Mat d2 = pairwise_sq_dist(a, b);
    double s = 0.0;
    for (double v : d2.data) s += std::sqrt(v);
    return s / static_cast<double>(d2.data.size());
  };
  return 2.0 * mean_dist(x, y) - mean_dist(x, x) - mean_dist(y, y);
}

struct AlignReport {
  double mutual_knn_pre = 0.0;
  double mutual_knn_post = 0.0;
  double spearman = 0.0;
  std::size_t k = 10;
  Histogram histogram_pre;
  Histogram histogram_post;
};

inline nlohmann::json to_json(const AlignReport& r) {
  return {{"k", r.k},
          {"mutual_knn_pre", r.mutual_knn_pre},
          {"mutual_knn_post", r.mutual_knn_post},
          {"spearman", r.spearman},
          {"histogram",
           {{"lo", r.histogram_pre.lo},
            {"hi", r.histogram_pre.hi},
            {"bins", r.histogram_pre.counts.size()},
            {"count_pre", r.histogram_pre.counts},
            {"count_post", r.histogram_post.counts}}},
          {"histogram_tv", total_variation(r.histogram_pre, r.histogram_post)}};
}

inline std::string histograms_to_csv(const Histogram& pre, const Histogram& post) {
  require(pre.counts.size() == post.counts.size(), ErrorKind::data, "shape-mismatch", "histogram bin counts differ");
  std::string s = "bin_lo,bin_hi,count_pre,count_post\n";
  for (std::size_t b = 0; b < pre.counts.size(); ++b)
    s += io::format_double(pre.bin_lo(b)) + "," + io::format_double(pre.bin_hi(b)) + "," +
         std::to_string(pre.counts[b]) + "," + std::to_string(post.counts[b]) + "\n";
  return s;
}

// Pre/post report for text mapped into the video space. Histograms compare
// the text distances before and after mapping on shared edges.
inline AlignReport align_report(const Mat& text, const Mat& mapped, const Mat& video, std::size_t k,
                                std::size_t bins = 20) {
  AlignReport r;
  r.k = k;
  r.mutual_knn_pre = mutual_knn(text, video, k);
  r.mutual_knn_post = mutual_knn(mapped, video, k);
  r.spearman = spearman_pairwise(text, mapped);
  const Vec dpre = detail::pairwise_distances(text), dpost = detail::pairwise_distances(mapped);
  double hi = 0.0;
  for (double d : dpre) hi = std::max(hi, d);
  for (double d : dpost) hi = std::max(hi, d);
  if (!(hi > 0.0)) hi = 1.0;
  r.histogram_pre = distance_histogram(text, bins, 0.0, hi * (1.0 + 1e-9));
  r.histogram_post = distance_histogram(mapped, bins, 0.0, hi * (1.0 + 1e-9));
  return r;
}

}  // namespace pisces
