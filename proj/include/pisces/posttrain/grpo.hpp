// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Group-relative policy optimization over a short stochastic sampler. Each
// step of the sampler is a Gaussian transition centred on the Euler ODE step
// with a fixed standard deviation, so log-densities are closed form.
//
//   L = mean_{i,t} max(-rho A_i, -clip(rho, 1-eps, 1+eps) A_i)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/posttrain/world.hpp"

namespace pisces {

struct GrpoConfig {
  std::size_t group = 8;  // G
  double clip = 0.2;
  std::size_t timesteps = 4;  // T
  double sde_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    require(group >= 2, ErrorKind::usage, "invalid-group", "GRPO group size must be >= 2");
    require(clip > 0.0 && clip < 1.0, ErrorKind::usage, "invalid-clip", "clip must be in (0, 1)");
    require(timesteps >= kFrames, ErrorKind::usage, "invalid-config", "need at least one step per preview frame");
    require(sde_noise > 0.0, ErrorKind::usage, "invalid-config", "sde_noise must be > 0");
  }
};

inline nlohmann::json to_json(const GrpoConfig& c) {
  return {{"group", c.group}, {"clip", c.clip}, {"timesteps", c.timesteps}, {"sde_noise", c.sde_noise}, {"seed", c.seed}};
}

inline Vec grpo_advantages(std::span<const double> rewards) {
  require(rewards.size() >= 2, ErrorKind::usage, "invalid-group", "advantages need a group of >= 2");
  const double n = static_cast<double>(rewards.size());
  double m = 0.0, v = 0.0;
  for (double r : rewards) m += r;
  m /= n;
  for (double r : rewards) v += (r - m) * (r - m);
  const double sd = std::sqrt(v / n);
  Vec a(rewards.size(), 0.0);
  if (sd < 1e-12) return a;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (rewards[i] - m) / sd;
  return a;
}

inline double clipped_objective(double rho, double adv, double clip) {
  return std::max(-rho * adv, -std::clamp(rho, 1.0 - clip, 1.0 + clip) * adv);
}

inline double gaussian_logpdf(std::span<const double> x, std::span<const double> mean, double sigma) {
  double q = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) q += (x[k] - mean[k]) * (x[k] - mean[k]);
  const double d = static_cast<double>(x.size());
  return -0.5 * q / (sigma * sigma) - d * std::log(sigma) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

// Samples are stored prompt-major: sample i belongs to group i / group.
struct RolloutRecord {
  std::size_t group = 0;
  double sigma = 0.0;
  Vec t_from, t_to;                    // per step
  std::vector<std::uint32_t> cls;      // per sample
  std::vector<Mat> states, actions;    // per step, samples x 2
  std::vector<Vec> logp_old;           // per step, per sample
  Vec quality, semantic, rewards, advantages;

  std::size_t samples() const { return cls.size(); }
  std::size_t steps() const { return t_from.size(); }
};

struct SampledClips {
  Mat clean;                              // samples x 2
  std::vector<std::vector<Vec>> frames;   // per sample, kFrames previews
};

// Runs the coarse sampler from pure noise at the top of the grid. With
// `record` set the transitions are stochastic and logged; otherwise the
// sampler is the deterministic ODE path.
template <class Rng>
SampledClips run_sampler(const ToyWorld& w, const ToyDenoiser& d, const std::vector<std::uint32_t>& cls,
                         std::size_t steps, Rng& rng, RolloutRecord* record = nullptr, double sigma = 0.0) {
  const NoiseSchedule& s = w.schedule;
  const std::size_t B = cls.size();
  const auto idx = descending_indices(s.size() - 1, steps);
  std::normal_distribution<double> nd;
  Mat z(B, kLatentDim);
  for (double& v : z.data) v = nd(rng);
  if (record) {
    record->cls = cls;
    record->sigma = sigma;
    record->t_from.assign(steps, 0.0);
    record->t_to.assign(steps, 0.0);
    record->states.assign(steps, Mat());
    record->actions.assign(steps, Mat());
    record->logp_old.assign(steps, Vec(B));
  }
  std::vector<std::size_t> preview_at(kFrames);
  for (std::size_t f = 0; f < kFrames; ++f) preview_at[f] = ((f + 1) * steps + kFrames / 2) / kFrames;
  SampledClips out{Mat(B, kLatentDim), std::vector<std::vector<Vec>>(B, std::vector<Vec>(kFrames))};

  for (std::size_t st = 0; st <= steps; ++st) {
    const double t = s.t(idx[st]);
    const std::vector<double> ts(B, t);
    const Mat e = d.eps(z, cls, ts);
    for (std::size_t f = 0; f < kFrames; ++f)
      if (preview_at[f] == st)
        for (std::size_t b = 0; b < B; ++b) out.frames[b][f] = single_step_to_zero(s, z.row(b), e.row(b), t);
    if (st == steps) {
      for (std::size_t b = 0; b < B; ++b) {
        const Vec c = single_step_to_zero(s, z.row(b), e.row(b), t);
        std::copy(c.begin(), c.end(), out.clean.row(b).begin());
      }
      break;
    }
    const double t_to = s.t(idx[st + 1]);
    Mat next(B, kLatentDim);
    for (std::size_t b = 0; b < B; ++b) {
      const Vec mean = ode_step(s, z.row(b), e.row(b), t, t_to);
      for (std::size_t j = 0; j < kLatentDim; ++j) next(b, j) = mean[j] + (record ? sigma * nd(rng) : 0.0);
      if (record) record->logp_old[st][b] = gaussian_logpdf(next.row(b), mean, sigma);
    }
    if (record) {
      record->t_from[st] = t;
      record->t_to[st] = t_to;
      record->states[st] = z;
      record->actions[st] = next;
    }
    z = std::move(next);
  }
  return out;
}

template <class Rng>
RolloutRecord grpo_rollouts(const ToyWorld& w, const ToyDenoiser& old_policy, const std::vector<std::uint32_t>& prompts,
                            const GrpoConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<std::uint32_t> cls;
  for (std::uint32_t c : prompts)
    for (std::size_t g = 0; g < cfg.group; ++g) cls.push_back(c);
  RolloutRecord rec;
  rec.group = cfg.group;
  const SampledClips clips = run_sampler(w, old_policy, cls, cfg.timesteps, rng, &rec, cfg.sde_noise);
  const std::size_t B = cls.size();
  rec.quality.resize(B);
  rec.semantic.resize(B);
  rec.rewards.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const WorldRewards r = score_clip(w, cls[b], clips.frames[b], clips.clean.row(b));
    rec.quality[b] = r.quality;
    rec.semantic[b] = r.semantic;
    rec.rewards[b] = r.quality + r.semantic;
  }
  rec.advantages.assign(B, 0.0);
  for (std::size_t g0 = 0; g0 < B; g0 += cfg.group) {
    const Vec a = grpo_advantages(std::span<const double>(rec.rewards).subspan(g0, cfg.group));
    std::copy(a.begin(), a.end(), rec.advantages.begin() + static_cast<std::ptrdiff_t>(g0));
  }
  return rec;
}

// With `grad` set, accumulates d L / d theta into policy.net.grads().
inline double grpo_loss(const RolloutRecord& rec, ToyDenoiser& policy, const NoiseSchedule& s, const GrpoConfig& cfg,
                        bool grad = false) {
  const std::size_t B = rec.samples(), T = rec.steps();
  require(B > 0 && T > 0, ErrorKind::data, "empty-input", "no rollouts");
  require(rec.logp_old.size() == T && rec.states.size() == T && rec.actions.size() == T, ErrorKind::data,
          "missing-logp", "rollout record lacks per-step log-densities");
  for (const Vec& lp : rec.logp_old)
    require(lp.size() == B, ErrorKind::data, "missing-logp", "rollout record lacks per-sample log-densities");
  require(rec.advantages.size() == B, ErrorKind::data, "shape-mismatch", "one advantage per sample");
  const double inv = 1.0 / static_cast<double>(B * T);
  const double var = rec.sigma * rec.sigma;

  double loss = 0.0;
  for (std::size_t st = 0; st < T; ++st) {
    const std::vector<double> ts(B, rec.t_from[st]);
    Tape tape;
    const Mat e = policy.eps(rec.states[st], rec.cls, ts, grad ? &tape : nullptr);
    const StepCoeffs c = ode_coeffs(s, rec.t_from[st], rec.t_to[st]);
    Mat dE(B, kLatentDim);
    for (std::size_t b = 0; b < B; ++b) {
      const Vec mean = ode_step(s, rec.states[st].row(b), e.row(b), rec.t_from[st], rec.t_to[st]);
      const double rho = std::exp(gaussian_logpdf(rec.actions[st].row(b), mean, rec.sigma) - rec.logp_old[st][b]);
      const double a = rec.advantages[b];
      loss += clipped_objective(rho, a, cfg.clip) * inv;
      if (!grad) continue;
      // Unclipped branch active: d/d rho = -A; otherwise the term is flat.
      const double clipped = std::clamp(rho, 1.0 - cfg.clip, 1.0 + cfg.clip);
      if (-rho * a < -clipped * a) continue;
      for (std::size_t j = 0; j < kLatentDim; ++j) {
        const double drho_dmean = rho * (rec.actions[st](b, j) - mean[j]) / var;
        dE(b, j) = -a * drho_dmean * c.a_eps * inv;
      }
    }
    if (grad) policy.net.backward(tape, dE);
  }
  return loss;
}

}  // namespace pisces
