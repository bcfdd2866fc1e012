// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Semantic + temporal + spatial cost between text tokens and video patches.

#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "pisces/numerics.hpp"

namespace pisces {

// Per-patch frame index and (row, col) grid coordinate. Patches need not be
// stored in raster order; `regular` builds the frame-major raster layout.
struct PatchGrid {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> frame_index;
  std::vector<std::array<double, 2>> position;

  std::size_t size() const { return frame_index.size(); }

  static PatchGrid regular(std::size_t frames, std::size_t height, std::size_t width) {
    require(frames > 0 && height > 0 && width > 0, ErrorKind::usage, "bad-grid", "grid dims must be positive");
    PatchGrid g{frames, height, width, {}, {}};
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) {
          g.frame_index.push_back(f);
          g.position.push_back({static_cast<double>(r), static_cast<double>(c)});
        }
    return g;
  }

  // New grid whose patch k is this grid's patch perm[k].
  PatchGrid permuted(std::span<const std::size_t> perm) const {
    PatchGrid g{frames, height, width, {}, {}};
    for (std::size_t k : perm) {
      g.frame_index.push_back(frame_index.at(k));
      g.position.push_back(position.at(k));
    }
    return g;
  }

  void validate() const {
    require(frame_index.size() == position.size() && frames * height * width == size(), ErrorKind::data, "bad-grid",
            "patch count must equal frames*height*width");
    for (std::size_t k = 0; k < size(); ++k) {
      require(frame_index[k] < frames, ErrorKind::data, "bad-grid", "frame index out of range");
      require(position[k][0] >= 0.0 && position[k][0] < static_cast<double>(height) && position[k][1] >= 0.0 &&
                  position[k][1] < static_cast<double>(width),
              ErrorKind::data, "bad-grid", "patch position outside grid");
    }
  }
};

struct CostWeights {
  double gamma = 0.2;
  double eta = 0.2;
};

struct CostMatrix {
  Mat cost;
  Mat semantic;
  Mat temporal;
  Mat spatial;
};

inline void check_attention(const Mat& attn, std::size_t patches) {
  require(attn.cols == patches, ErrorKind::data, "shape-mismatch", "attention columns must equal patch count");
  for (std::size_t i = 0; i < attn.rows; ++i) {
    double s = 0.0;
    for (double a : attn.row(i)) {
      require(a >= 0.0 && std::isfinite(a), ErrorKind::data, "bad-attention", "attention entries must be >= 0");
      s += a;
    }
    require(std::abs(s - 1.0) <= 1e-9, ErrorKind::data, "bad-attention", "attention row does not sum to 1");
  }
}

inline Vec expected_frame(const Mat& attn, const PatchGrid& grid) {
  check_attention(attn, grid.size());
  Vec tau(attn.rows, 0.0);
  for (std::size_t i = 0; i < attn.rows; ++i)
    for (std::size_t k = 0; k < attn.cols; ++k) tau[i] += attn(i, k) * static_cast<double>(grid.frame_index[k]);
  return tau;
}

inline Mat expected_position(const Mat& attn, const PatchGrid& grid) {
  check_attention(attn, grid.size());
  Mat pi(attn.rows, 2);
  for (std::size_t i = 0; i < attn.rows; ++i)
    for (std::size_t k = 0; k < attn.cols; ++k) {
      pi(i, 0) += attn(i, k) * grid.position[k][0];
      pi(i, 1) += attn(i, k) * grid.position[k][1];
    }
  return pi;
}

inline CostMatrix build_cost(const Mat& text, const Mat& patches, const Mat& attn, const PatchGrid& grid,
                             const CostWeights& wts) {
  require(text.cols == patches.cols, ErrorKind::data, "shape-mismatch", "text and patch embedding dims differ");
  require(attn.rows == text.rows, ErrorKind::data, "shape-mismatch", "attention rows must equal text tokens");
  require(grid.size() == patches.rows, ErrorKind::data, "shape-mismatch", "grid size must equal patch count");
  require(wts.gamma >= 0.0 && wts.eta >= 0.0 && std::isfinite(wts.gamma) && std::isfinite(wts.eta),
          ErrorKind::usage, "invalid-weights", "cost weights must be finite and >= 0");
  for (std::size_t i = 0; i < text.rows; ++i)
    require(norm(text.row(i)) > 0.0, ErrorKind::numeric, "degenerate-token", "zero-norm text token");
  for (std::size_t j = 0; j < patches.rows; ++j)
    require(norm(patches.row(j)) > 0.0, ErrorKind::numeric, "degenerate-token", "zero-norm patch token");

  const std::size_t n = text.rows, m = patches.rows;
  const Vec tau = expected_frame(attn, grid);
  const Mat pi = expected_position(attn, grid);

  CostMatrix out{Mat(n, m), Mat(n, m), Mat(n, m), Mat(n, m)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      out.semantic(i, j) = 1.0 - cosine(text.row(i), patches.row(j));
      out.temporal(i, j) = std::abs(tau[i] - static_cast<double>(grid.frame_index[j]));
      out.spatial(i, j) = std::hypot(pi(i, 0) - grid.position[j][0], pi(i, 1) - grid.position[j][1]);
    }
  range_normalize(out.semantic.data);
  range_normalize(out.temporal.data);
  range_normalize(out.spatial.data);
  for (std::size_t k = 0; k < n * m; ++k)
    out.cost.data[k] = out.semantic.data[k] + wts.gamma * out.temporal.data[k] + wts.eta * out.spatial.data[k];
  range_normalize(out.cost.data);
  return out;
}

}  // namespace pisces
