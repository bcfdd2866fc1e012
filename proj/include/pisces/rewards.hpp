// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// The two OT-aligned rewards.
//
//   quality  = cos(T*(y_cls), xhat_cls)
//   semantic = softmax(VTM[pool(A~ . xhat)])[1]
//
// where A~ is the vanilla attention fused with the partial-OT plan over the
// spatio-temporal cost. The VTM head sees the query-gated pooled feature
//   h = mean_i ( y_i * (A~ xhat)_i )     (elementwise product)
// so that an affine head can score text/video agreement.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pisces/costmatrix.hpp"
#include "pisces/fusion.hpp"
#include "pisces/io.hpp"
#include "pisces/neural_ot.hpp"
#include "pisces/sinkhorn.hpp"

namespace pisces {

struct VtmHead {
  Mat weight;  // 2 x d, row 1 scores a positive match
  Vec bias = Vec(2, 0.0);

  VtmHead() = default;
  explicit VtmHead(std::size_t dim) : weight(2, dim), bias(2, 0.0) {}

  std::size_t dim() const { return weight.cols; }

  Vec logits(std::span<const double> h) const {
    require(h.size() == dim(), ErrorKind::data, "shape-mismatch", "VTM head input dim");
    return {dot(weight.row(0), h) + bias[0], dot(weight.row(1), h) + bias[1]};
  }

  // softmax(logits)[1], computed as a logistic for stability.
  double positive_prob(std::span<const double> h) const {
    const Vec l = logits(h);
    return 1.0 / (1.0 + std::exp(l[0] - l[1]));
  }

  friend bool operator==(const VtmHead&, const VtmHead&) = default;
};

// "OTVTM1" | u32 dim | f64[2 * dim] weights | f64[2] bias
inline std::string serialize(const VtmHead& h) {
  io::ByteWriter w;
  w.raw("OTVTM1");
  w.u32(static_cast<std::uint32_t>(h.dim()));
  w.f64s(h.weight.data);
  w.f64s(h.bias);
  return w.bytes();
}

inline VtmHead deserialize_vtm(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  if (r.remaining() < 6 || r.raw(6) != "OTVTM1") throw Error(ErrorKind::data, "bad-magic", "not an OTVTM1 file");
  const std::uint32_t dim = r.u32();
  require(dim >= 1 && dim <= (1u << 20), ErrorKind::data, "dim-overflow", "implausible VTM dim");
  VtmHead h(dim);
  h.weight.data = r.f64s(2 * static_cast<std::size_t>(dim));
  h.bias = r.f64s(2);
  require(all_finite(h.weight.data) && all_finite(h.bias), ErrorKind::numeric, "non-finite", "VTM weights");
  return h;
}

struct RewardPair {
  double quality = 0.0;
  double semantic = 0.5;
};

inline double quality_reward(const OtMapArtifact& map, std::span<const double> y_cls, std::span<const double> xhat_cls) {
  require(y_cls.size() == map.in_dim() && xhat_cls.size() == map.out_dim(), ErrorKind::data, "shape-mismatch",
          "quality reward dims do not match the OT map");
  const Vec mapped = map.apply(y_cls);
  return cosine(mapped, xhat_cls);
}

// Everything the semantic pipeline computed, kept for the backward pass.
struct SemanticTrace {
  CostMatrix cost;
  TransportPlan plan;
  FusedAttention fused;
  Mat pooled;    // A~ . xhat, N x d
  Vec features;  // VTM head input
  double reward = 0.5;
};

struct SemanticConfig {
  CostWeights weights;
  PartialOTConfig ot;
  double fusion_eps = kDefaultFusionEps;
};

// `frozen_plan`, when given, replaces the Sinkhorn solve (the plan is a
// constant prior, so this is how callers pin it for finite differencing).
inline SemanticTrace semantic_reward_trace(const Mat& text_tokens, const Mat& patch_tokens, const Mat& attn,
                                           const PatchGrid& grid, const SemanticConfig& cfg, const VtmHead& vtm,
                                           const Mat* frozen_plan = nullptr) {
  require(vtm.dim() == text_tokens.cols, ErrorKind::data, "shape-mismatch", "VTM head dim vs token dim");
  SemanticTrace t;
  t.cost = build_cost(text_tokens, patch_tokens, attn, grid, cfg.weights);
  if (frozen_plan) {
    require_same_shape(*frozen_plan, attn, "frozen plan");
    t.plan.plan = *frozen_plan;
  } else {
    t.plan = solve_partial_ot(t.cost.cost, cfg.ot);
  }
  t.fused = fuse(attn, t.plan.plan, cfg.fusion_eps);
  t.pooled = fused_pool(t.fused, patch_tokens);
  const std::size_t n = text_tokens.rows, d = text_tokens.cols;
  t.features.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) t.features[k] += text_tokens(i, k) * t.pooled(i, k) / static_cast<double>(n);
  t.reward = vtm.positive_prob(t.features);
  return t;
}

inline double semantic_reward(const Mat& text_tokens, const Mat& patch_tokens, const Mat& attn, const PatchGrid& grid,
                              const CostWeights& wts, const PartialOTConfig& ot, const VtmHead& vtm) {
  return semantic_reward_trace(text_tokens, patch_tokens, attn, grid, {wts, ot, kDefaultFusionEps}, vtm).reward;
}

struct SemanticGrad {
  Mat d_patches;  // through the pooling path only
  Mat d_attn;     // through the fusion, to be chained into whatever produced A
};

// Gradient of the semantic reward with the plan held fixed.
inline SemanticGrad semantic_reward_backward(const SemanticTrace& t, const Mat& text_tokens, const Mat& patch_tokens,
                                             const Mat& attn, const VtmHead& vtm) {
  const std::size_t n = text_tokens.rows, d = text_tokens.cols, m = patch_tokens.rows;
  const double s = t.reward;
  // d s / d logits = s(1-s) * (-1, +1)
  Vec dh(d);
  for (std::size_t k = 0; k < d; ++k) dh[k] = s * (1.0 - s) * (vtm.weight(1, k) - vtm.weight(0, k));
  Mat d_pooled(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) d_pooled(i, k) = dh[k] * text_tokens(i, k) / static_cast<double>(n);
  Mat d_fused(n, m);
  SemanticGrad g{Mat(m, d), Mat()};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      d_fused(i, j) = dot(d_pooled.row(i), patch_tokens.row(j));
      const double a = t.fused.attn(i, j);
      for (std::size_t k = 0; k < d; ++k) g.d_patches(j, k) += a * d_pooled(i, k);
    }
  g.d_attn = fuse_vjp(attn, t.plan.plan, d_fused, t.fused.eps_smooth);
  return g;
}

inline std::vector<RewardPair> grouped_rewards(const std::vector<RewardPair>& batch) {
  require(!batch.empty(), ErrorKind::data, "empty-input", "no rewards in batch");
  for (const auto& r : batch) {
    require(r.quality >= -1.0 && r.quality <= 1.0, ErrorKind::numeric, "out-of-range", "quality must be in [-1, 1]");
    require(r.semantic > 0.0 && r.semantic < 1.0, ErrorKind::numeric, "out-of-range", "semantic must be in (0, 1)");
  }
  return batch;
}

}  // namespace pisces
