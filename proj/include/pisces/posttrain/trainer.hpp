// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// The post-training loop (direct or GRPO), held-out evaluation and the
// JSONL / CSV training report.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/metrics.hpp"
#include "pisces/posttrain/direct.hpp"
#include "pisces/posttrain/grpo.hpp"

namespace pisces {

enum class PosttrainMode { direct, grpo };

inline std::string to_string(PosttrainMode m) { return m == PosttrainMode::direct ? "direct" : "grpo"; }
inline PosttrainMode posttrain_mode_from_string(const std::string& s) {
  if (s == "direct") return PosttrainMode::direct;
  if (s == "grpo") return PosttrainMode::grpo;
  throw Error(ErrorKind::usage, "unknown-mode", "mode must be direct or grpo, got '" + s + "'");
}

struct PosttrainConfig {
  PosttrainMode mode = PosttrainMode::direct;
  int steps = 500;
  std::uint64_t seed = 0;
  double lr = 3e-4;
  std::size_t prompts = 4;  // prompts per step
  std::size_t group = 8;    // samples per prompt (direct) and G (grpo)
  double cd_weight = 1.0;
  bool detach_rewards = false;
  bool adaptive = false;
  double lambda = 0.95;
  GrpoConfig grpo;
  int eval_every = 50;
  std::size_t heldout = 64;
  std::size_t energy_samples = 1000;

  void validate() const {
    require(steps >= 0, ErrorKind::usage, "invalid-config", "steps must be >= 0");
    require(lr > 0.0, ErrorKind::usage, "invalid-config", "lr must be > 0");
    require(prompts >= 1 && group >= 1, ErrorKind::usage, "invalid-config", "prompts and group must be >= 1");
    require(eval_every >= 1 && heldout >= 1 && energy_samples >= 2, ErrorKind::usage, "invalid-config",
            "evaluation sizes must be positive");
    require(lambda > 0.0 && lambda <= 1.0, ErrorKind::usage, "invalid-lambda", "EMA rate must be in (0, 1]");
    if (mode == PosttrainMode::grpo) grpo.validate();
  }
};

inline nlohmann::json to_json(const PosttrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"steps", c.steps},
          {"seed", c.seed},
          {"lr", c.lr},
          {"prompts", c.prompts},
          {"group", c.group},
          {"cd_weight", c.cd_weight},
          {"detach_rewards", c.detach_rewards},
          {"adaptive", c.adaptive},
          {"lambda", c.lambda},
          {"grpo", to_json(c.grpo)},
          {"eval_every", c.eval_every},
          {"heldout", c.heldout},
          {"energy_samples", c.energy_samples}};
}

struct HeldoutScore {
  double quality = 0.0;
  double semantic = 0.0;
  double mean() const { return 0.5 * (quality + semantic); }
};

// Deterministic coarse sampling from a fixed set of noises, prompts cycling
// through the classes; the seed is independent of the training seed.
inline HeldoutScore evaluate_heldout(const ToyWorld& w, const ToyDenoiser& d, std::size_t count,
                                     std::size_t steps = kFrames) {
  std::mt19937_64 rng(0x5eed0fULL + w.cfg.seed);
  std::vector<std::uint32_t> cls(count);
  for (std::size_t i = 0; i < count; ++i) cls[i] = static_cast<std::uint32_t>(i % w.classes());
  const SampledClips clips = run_sampler(w, d, cls, steps, rng);
  HeldoutScore h;
  for (std::size_t i = 0; i < count; ++i) {
    const WorldRewards r = score_clip(w, cls[i], clips.frames[i], clips.clean.row(i));
    h.quality += r.quality / static_cast<double>(count);
    h.semantic += r.semantic / static_cast<double>(count);
  }
  return h;
}

// Energy distance between generated samples and real data with the same
// prompt mix.
inline double sample_energy(const ToyWorld& w, const ToyDenoiser& d, std::size_t count, std::size_t steps = kFrames) {
  std::mt19937_64 rng(0xe4e4ULL + w.cfg.seed);
  std::vector<std::uint32_t> cls(count);
  for (std::size_t i = 0; i < count; ++i) cls[i] = static_cast<std::uint32_t>(i % w.classes());
  const SampledClips clips = run_sampler(w, d, cls, steps, rng);
  Mat real(count, kLatentDim);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec x = sample_data(w, cls[i], rng);
    real(i, 0) = x[0];
    real(i, 1) = x[1];
  }
  return energy_distance(clips.clean, real);
}

struct StepRecord {
  int step = 0;
  std::optional<double> loss, cd, r_quality, r_semantic, heldout_reward;
};

struct PosttrainReport {
  PosttrainConfig config;
  std::vector<StepRecord> records;
  double initial_heldout = 0.0;
  double final_heldout = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  ToyDenoiser denoiser;  // final weights
};

inline PosttrainReport run_posttrain(const ToyWorld& w, const PosttrainConfig& cfg) {
  cfg.validate();
  PosttrainReport rep;
  rep.config = cfg;
  ToyDenoiser d = w.denoiser;
  d.lambda = cfg.lambda;
  std::mt19937_64 rng(cfg.seed);
  Adam opt;
  opt.lr = cfg.lr;

  rep.initial_heldout = evaluate_heldout(w, d, cfg.heldout).mean();
  rep.initial_energy = sample_energy(w, d, cfg.energy_samples);
  StepRecord first;
  first.heldout_reward = rep.initial_heldout;
  rep.records.push_back(first);

  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.classes() - 1));
  for (int step = 1; step <= cfg.steps; ++step) {
    StepRecord r;
    r.step = step;
    d.net.zero_grad();
    if (cfg.mode == PosttrainMode::direct) {
      const DirectBatch batch = sample_direct_batch(w, cfg.prompts, cfg.group, rng);
      DirectOptions o;
      o.cd_weight = cfg.cd_weight;
      o.detach_rewards = cfg.detach_rewards;
      o.adaptive = cfg.adaptive;
      const DirectResult res = direct_loss(w, d, batch, o, true);
      r.loss = res.loss;
      r.cd = res.cd;
      r.r_quality = res.quality;
      r.r_semantic = res.semantic;
    } else {
      std::vector<std::uint32_t> prompts(cfg.prompts);
      for (auto& c : prompts) c = pick(rng);
      const RolloutRecord rec = grpo_rollouts(w, d, prompts, cfg.grpo, rng);
      const double lg = grpo_loss(rec, d, w.schedule, cfg.grpo, true);
      const DirectBatch batch = sample_direct_batch(w, cfg.prompts, cfg.group, rng);
      DirectOptions o;
      o.cd_weight = cfg.cd_weight;
      o.rewards = false;
      const DirectResult res = direct_loss(w, d, batch, o, true);
      double mq = 0.0, ms = 0.0;
      for (std::size_t i = 0; i < rec.samples(); ++i) {
        mq += rec.quality[i] / static_cast<double>(rec.samples());
        ms += rec.semantic[i] / static_cast<double>(rec.samples());
      }
      r.loss = res.loss + lg;
      r.cd = res.cd;
      r.r_quality = mq;
      r.r_semantic = ms;
    }
    require(all_finite(d.net.grads()), ErrorKind::numeric, "non-finite", "gradient blew up at step " + std::to_string(step));
    opt.step(d.net.params(), d.net.grads());
    ema_update(d);
    if (step % cfg.eval_every == 0 || step == cfg.steps) r.heldout_reward = evaluate_heldout(w, d, cfg.heldout).mean();
    rep.records.push_back(r);
  }
  d.net.zero_grad();
  rep.final_heldout = rep.records.back().heldout_reward.value_or(rep.initial_heldout);
  rep.final_energy = cfg.steps > 0 ? sample_energy(w, d, cfg.energy_samples) : rep.initial_energy;
  rep.denoiser = std::move(d);
  return rep;
}

inline std::string report_jsonl(const PosttrainReport& rep) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  std::string out;
  for (const auto& r : rep.records) {
    const nlohmann::json j = {{"step", r.step},
                              {"loss", opt(r.loss)},
                              {"cd", opt(r.cd)},
                              {"r_quality", opt(r.r_quality)},
                              {"r_semantic", opt(r.r_semantic)},
                              {"heldout_reward", opt(r.heldout_reward)}};
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string report_summary_csv(const PosttrainReport& rep) {
  const double gain = rep.initial_heldout != 0.0 ? (rep.final_heldout - rep.initial_heldout) / std::abs(rep.initial_heldout) : 0.0;
  return "mode,steps,seed,initial_heldout,final_heldout,relative_gain,initial_energy,final_energy\n" +
         to_string(rep.config.mode) + "," + std::to_string(rep.config.steps) + "," + std::to_string(rep.config.seed) +
         "," + io::format_double(rep.initial_heldout) + "," + io::format_double(rep.final_heldout) + "," +
         io::format_double(gain) + "," + io::format_double(rep.initial_energy) + "," +
         io::format_double(rep.final_energy) + "\n";
}

}  // namespace pisces
