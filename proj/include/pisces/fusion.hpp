// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pisces/numerics.hpp"

namespace pisces {

inline constexpr double kDefaultFusionEps = 1e-8;

struct FusedAttention {
  Mat attn;
  double eps_smooth = kDefaultFusionEps;
};

namespace detail {
inline void check_fuse_args(const Mat& attn, const Mat& plan, double eps_smooth) {
  require_same_shape(attn, plan, "fuse");
  require(eps_smooth > 0.0, ErrorKind::usage, "invalid-epsilon", "fusion smoothing must be > 0");
}
}  // namespace detail

// Row-wise renormalized (A + eps) * (P + eps). The plan is a constant prior.
inline FusedAttention fuse(const Mat& attn, const Mat& plan, double eps_smooth = kDefaultFusionEps) {
  detail::check_fuse_args(attn, plan, eps_smooth);
  FusedAttention out{Mat(attn.rows, attn.cols), eps_smooth};
  for (std::size_t i = 0; i < attn.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < attn.cols; ++j)
      s += (out.attn(i, j) = (attn(i, j) + eps_smooth) * (plan(i, j) + eps_smooth));
    for (std::size_t j = 0; j < attn.cols; ++j) out.attn(i, j) /= s;
  }
  return out;
}

// Directional derivative of fuse along `dir` (a perturbation of A).
inline Mat fuse_jvp(const Mat& attn, const Mat& plan, const Mat& dir, double eps_smooth = kDefaultFusionEps) {
  detail::check_fuse_args(attn, plan, eps_smooth);
  require_same_shape(attn, dir, "fuse_jvp");
  const Mat fused = fuse(attn, plan, eps_smooth).attn;
  Mat out(attn.rows, attn.cols);
  for (std::size_t i = 0; i < attn.rows; ++i) {
    double s = 0.0, lin = 0.0;
    for (std::size_t j = 0; j < attn.cols; ++j) {
      s += (attn(i, j) + eps_smooth) * (plan(i, j) + eps_smooth);
      lin += (plan(i, j) + eps_smooth) * dir(i, j);
    }
    for (std::size_t j = 0; j < attn.cols; ++j)
      out(i, j) = ((plan(i, j) + eps_smooth) * dir(i, j) - fused(i, j) * lin) / s;
  }
  return out;
}

// Gradient with respect to A given the upstream gradient on the fused map.
inline Mat fuse_vjp(const Mat& attn, const Mat& plan, const Mat& upstream, double eps_smooth = kDefaultFusionEps) {
  detail::check_fuse_args(attn, plan, eps_smooth);
  require_same_shape(attn, upstream, "fuse_vjp");
  const Mat fused = fuse(attn, plan, eps_smooth).attn;
  Mat out(attn.rows, attn.cols);
  for (std::size_t i = 0; i < attn.rows; ++i) {
    double s = 0.0, inner = 0.0;
    for (std::size_t j = 0; j < attn.cols; ++j) {
      s += (attn(i, j) + eps_smooth) * (plan(i, j) + eps_smooth);
      inner += upstream(i, j) * fused(i, j);
    }
    for (std::size_t j = 0; j < attn.cols; ++j) out(i, j) = (plan(i, j) + eps_smooth) * (upstream(i, j) - inner) / s;
  }
  return out;
}

inline Mat fused_pool(const FusedAttention& fused, const Mat& patches) {
  require(fused.attn.cols == patches.rows, ErrorKind::data, "shape-mismatch", "fused attention vs patch rows");
  return matmul(fused.attn, patches);
}

}  // namespace pisces
