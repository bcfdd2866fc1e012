// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Direct reward backpropagation:
//
//   L = L_CD - R_quality - R_semantic
//
// per training pair (x0, c). The noisy latent z at t_{n+k} is stepped to t_n
// with the frozen pretrained teacher, the EMA target maps
// that to its clean estimate, and the student's one-jump estimate from z is
// both the CD prediction and the clean sample that gets rewarded. The video
// seen by the semantic reward is the kFrames clean previews along a short
// trajectory from t_{n+k} down to the bottom of the grid.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pisces/posttrain/world.hpp"

namespace pisces {

struct DirectBatch {
  std::vector<std::uint32_t> cls;
  Mat x0;
  std::vector<std::size_t> n;  // t_n index; the noisy latent lives at n + k
  Mat noise;
  std::size_t group = 1;  // consecutive samples sharing a prompt

  std::size_t size() const { return cls.size(); }
};

template <class Rng>
DirectBatch sample_direct_batch(const ToyWorld& w, std::size_t prompts, std::size_t group, Rng& rng) {
  require(prompts >= 1 && group >= 1, ErrorKind::usage, "invalid-batch", "need at least one sample");
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.classes() - 1));
  std::uniform_int_distribution<std::size_t> npick(0, w.schedule.size() - 1 - static_cast<std::size_t>(w.schedule.skip));
  std::normal_distribution<double> nd;
  DirectBatch b;
  b.group = group;
  const std::size_t total = prompts * group;
  b.x0 = Mat(total, kLatentDim);
  b.noise = Mat(total, kLatentDim);
  for (std::size_t p = 0; p < prompts; ++p) {
    const std::uint32_t c = pick(rng);
    for (std::size_t g = 0; g < group; ++g) {
      const std::size_t r = p * group + g;
      b.cls.push_back(c);
      const Vec x = sample_data(w, c, rng);
      b.x0(r, 0) = x[0];
      b.x0(r, 1) = x[1];
      b.n.push_back(npick(rng));
      b.noise(r, 0) = nd(rng);
      b.noise(r, 1) = nd(rng);
    }
  }
  return b;
}

struct DirectOptions {
  double cd_weight = 1.0;
  bool rewards = true;          // false skips the reward branch entirely
  bool detach_rewards = false;  // rewards enter the loss as constants
  bool adaptive = false;        // group-normalized rewards, statistics detached
  const std::vector<Mat>* frozen_plans = nullptr;
};

struct DirectResult {
  double loss = 0.0;
  double cd = 0.0;
  double quality = 0.0;
  double semantic = 0.0;
  std::vector<Mat> plans;
};

namespace detail {

// Per-sample weights for the rewards in the loss (before the 1/B mean).
inline Vec reward_weights(const Vec& r, std::size_t group, bool adaptive) {
  Vec wts(r.size(), 1.0);
  if (!adaptive) return wts;
  for (std::size_t g0 = 0; g0 < r.size(); g0 += group) {
    const std::size_t g1 = std::min(r.size(), g0 + group);
    double m = 0.0, v = 0.0;
    for (std::size_t i = g0; i < g1; ++i) m += r[i];
    m /= static_cast<double>(g1 - g0);
    for (std::size_t i = g0; i < g1; ++i) v += (r[i] - m) * (r[i] - m);
    const double sd = std::sqrt(v / static_cast<double>(g1 - g0));
    for (std::size_t i = g0; i < g1; ++i) wts[i] = sd < 1e-12 ? 0.0 : 1.0 / sd;
  }
  return wts;
}

inline double normalized_sum(const Vec& r, const Vec& wts, std::size_t group, bool adaptive) {
  if (!adaptive) {
    double s = 0.0;
    for (double v : r) s += v;
    return s;
  }
  double s = 0.0;
  for (std::size_t g0 = 0; g0 < r.size(); g0 += group) {
    const std::size_t g1 = std::min(r.size(), g0 + group);
    double m = 0.0;
    for (std::size_t i = g0; i < g1; ++i) m += r[i];
    m /= static_cast<double>(g1 - g0);
    for (std::size_t i = g0; i < g1; ++i) s += (r[i] - m) * wts[i];
  }
  return s;
}

}  // namespace detail

// Evaluates the loss; with `grad` set, accumulates d loss / d theta into
// d.net.grads() (the caller zeroes them).
inline DirectResult direct_loss(const ToyWorld& w, ToyDenoiser& d, const DirectBatch& batch, const DirectOptions& opt,
                                bool grad = false) {
  const NoiseSchedule& s = w.schedule;
  const std::size_t B = batch.size();
  require(B > 0, ErrorKind::data, "empty-input", "direct_loss on empty batch");
  require(!opt.frozen_plans || opt.frozen_plans->size() == B, ErrorKind::data, "shape-mismatch",
          "one frozen plan per sample");
  const auto k = static_cast<std::size_t>(s.skip);
  const double inv_b = 1.0 / static_cast<double>(B);

  // z at t_{n+k}
  std::vector<double> t_hi(B), t_lo(B);
  Mat z_hi(B, kLatentDim);
  for (std::size_t b = 0; b < B; ++b) {
    require(batch.n[b] + k < s.size(), ErrorKind::usage, "off-grid", "n + k beyond the grid");
    t_hi[b] = s.t(batch.n[b] + k);
    t_lo[b] = s.t(batch.n[b]);
    for (std::size_t j = 0; j < kLatentDim; ++j)
      z_hi(b, j) = s.alpha(t_hi[b]) * batch.x0(b, j) + s.beta(t_hi[b]) * batch.noise(b, j);
  }

  // Stage 0 is the student jump and the first trajectory step.
  constexpr std::size_t F = kFrames;
  std::vector<Mat> Z(F + 1), E(F + 1);
  std::vector<Tape> tapes(F + 1);
  std::vector<std::vector<std::size_t>> idx(B);
  for (std::size_t b = 0; b < B; ++b) idx[b] = descending_indices(batch.n[b] + k, F);
  Z[0] = z_hi;
  E[0] = d.eps(Z[0], batch.cls, t_hi, grad ? &tapes[0] : nullptr);

  const Mat e_teacher = d.eps_teacher(Z[0], batch.cls, t_hi);
  Mat z_lo(B, kLatentDim), g_student(B, kLatentDim);
  for (std::size_t b = 0; b < B; ++b) {
    const Vec lo = ode_step(s, Z[0].row(b), e_teacher.row(b), t_hi[b], t_lo[b]);
    const Vec gs = single_step_to_zero(s, Z[0].row(b), E[0].row(b), t_hi[b]);
    std::copy(lo.begin(), lo.end(), z_lo.row(b).begin());
    std::copy(gs.begin(), gs.end(), g_student.row(b).begin());
  }
  const Mat e_tgt = d.eps_target(z_lo, batch.cls, t_lo);
  Mat g_target(B, kLatentDim);
  for (std::size_t b = 0; b < B; ++b) {
    const Vec gt = single_step_to_zero(s, z_lo.row(b), e_tgt.row(b), t_lo[b]);
    std::copy(gt.begin(), gt.end(), g_target.row(b).begin());
  }

  DirectResult res;
  Vec cd(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < kLatentDim; ++j)
      cd[b] += (g_student(b, j) - g_target(b, j)) * (g_student(b, j) - g_target(b, j));
    res.cd += cd[b] * inv_b;
  }
  res.loss = opt.cd_weight * res.cd;

  Mat dG(B, kLatentDim);  // d loss / d g_student
  if (grad)
    for (std::size_t i = 0; i < dG.data.size(); ++i)
      dG.data[i] = opt.cd_weight * 2.0 * (g_student.data[i] - g_target.data[i]) * inv_b;

  if (!opt.rewards) {
    if (grad) {
      Mat dE0(B, kLatentDim);
      for (std::size_t b = 0; b < B; ++b) {
        const double c2 = ode_coeffs(s, t_hi[b], 0.0).a_eps;
        for (std::size_t j = 0; j < kLatentDim; ++j) dE0(b, j) = c2 * dG(b, j);
      }
      d.net.backward(tapes[0], dE0);
    }
    return res;
  }

  // Trajectory and previews.
  std::vector<std::vector<double>> tf(F + 1, std::vector<double>(B));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f <= F; ++f) tf[f][b] = s.t(idx[b][f]);
  for (std::size_t f = 0; f < F; ++f) {
    Z[f + 1] = Mat(B, kLatentDim);
    for (std::size_t b = 0; b < B; ++b) {
      const StepCoeffs c = ode_coeffs(s, tf[f][b], tf[f + 1][b]);
      for (std::size_t j = 0; j < kLatentDim; ++j) Z[f + 1](b, j) = c.a_z * Z[f](b, j) + c.a_eps * E[f](b, j);
    }
    E[f + 1] = d.eps(Z[f + 1], batch.cls, tf[f + 1], grad ? &tapes[f + 1] : nullptr);
  }

  Vec q(B), sem(B);
  std::vector<std::vector<Vec>> frames(B, std::vector<Vec>(F));
  std::vector<WorldRewards> wr(B);
  res.plans.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f)
      frames[b][f] = single_step_to_zero(s, Z[f + 1].row(b), E[f + 1].row(b), tf[f + 1][b]);
    wr[b] = score_clip(w, batch.cls[b], frames[b], g_student.row(b),
                       opt.frozen_plans ? &(*opt.frozen_plans)[b] : nullptr);
    q[b] = wr[b].quality;
    sem[b] = wr[b].semantic;
    res.plans[b] = wr[b].trace.plan.plan;
    res.quality += q[b] * inv_b;
    res.semantic += sem[b] * inv_b;
  }
  const Vec wq = detail::reward_weights(q, batch.group, opt.adaptive);
  const Vec ws = detail::reward_weights(sem, batch.group, opt.adaptive);
  res.loss -= (detail::normalized_sum(q, wq, batch.group, opt.adaptive) +
               detail::normalized_sum(sem, ws, batch.group, opt.adaptive)) *
              inv_b;
  if (!grad) return res;

  std::vector<Mat> dFrame(F, Mat(B, kLatentDim));
  if (!opt.detach_rewards) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::uint32_t c = batch.cls[b];
      // quality
      const Vec phi = featurize(w, g_student.row(b));
      Vec dphi = cosine_grad_b(w.mapped_cls.row(c), phi);
      for (double& v : dphi) v *= -wq[b] * inv_b;
      const Vec dg = featurize_vjp(w, g_student.row(b), dphi);
      dG(b, 0) += dg[0];
      dG(b, 1) += dg[1];
      // semantic
      const Mat x = patch_tokens(w, frames[b]);
      const Mat a = vanilla_attention(w.text_tokens[c], x);
      const SemanticGrad sg = semantic_reward_backward(wr[b].trace, w.text_tokens[c], x, a, w.vtm);
      Mat dx = vanilla_attention_vjp(w.text_tokens[c], a, sg.d_attn);
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = -ws[b] * inv_b * (dx.data[i] + sg.d_patches.data[i]);
      const auto dfr = patch_tokens_vjp(w, frames[b], dx);
      for (std::size_t f = 0; f < F; ++f) {
        dFrame[f](b, 0) = dfr[f][0];
        dFrame[f](b, 1) = dfr[f][1];
      }
    }
  }

  // Reverse through the trajectory.
  Mat dZ_next;
  for (std::size_t f = F + 1; f-- > 0;) {
    Mat dZ(B, kLatentDim), dE(B, kLatentDim);
    for (std::size_t b = 0; b < B; ++b) {
      if (f >= 1) {
        const StepCoeffs c = ode_coeffs(s, tf[f][b], 0.0);
        for (std::size_t j = 0; j < kLatentDim; ++j) {
          dZ(b, j) += c.a_z * dFrame[f - 1](b, j);
          dE(b, j) += c.a_eps * dFrame[f - 1](b, j);
        }
      } else {
        const double c2 = ode_coeffs(s, t_hi[b], 0.0).a_eps;
        for (std::size_t j = 0; j < kLatentDim; ++j) dE(b, j) += c2 * dG(b, j);
      }
      if (f < F) {
        const StepCoeffs c = ode_coeffs(s, tf[f][b], tf[f + 1][b]);
        for (std::size_t j = 0; j < kLatentDim; ++j) {
          dZ(b, j) += c.a_z * dZ_next(b, j);
          dE(b, j) += c.a_eps * dZ_next(b, j);
        }
      }
    }
    const Mat din = d.net.backward(tapes[f], dE);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < kLatentDim; ++j) dZ(b, j) += din(b, j);
    dZ_next = std::move(dZ);
  }
  return res;
}

}  // namespace pisces
