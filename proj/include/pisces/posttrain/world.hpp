// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy world: a class-conditional 2-D data distribution, a frozen random
// "video" featurizer, a misaligned text token table, plus the frozen reward
// models (OT map, VTM head) and a pretrained denoiser. Everything is rebuilt
// deterministically from a WorldConfig.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/neural_ot.hpp"
#include "pisces/posttrain/denoiser.hpp"
#include "pisces/rewards.hpp"

namespace pisces {

struct WorldConfig {
  std::size_t classes = 4;
  std::size_t embed_dim = 8;
  std::size_t cells = 1;  // patches per frame side; 2 gives a 2x2 grid
  std::size_t schedule_steps = 40;
  double t_min = 0.01;
  double t_max = 0.9;
  int skip = 1;
  double radius = 2.0;
  double mode_sep = 0.5;   // half distance between the two modes of a class
  double mode_std = 0.2;
  double feat_scale = 0.6;  // std of featurizer weights
  double text_offset = 1.0;  // norm of the text translation
  double caption_noise = 0.15;
  double label_noise = 0.75;  // fraction of pretraining pairs with a random label
  std::size_t hidden = 64;
  int pretrain_steps = 2000;
  std::size_t pretrain_batch = 128;
  double pretrain_lr = 1e-3;
  int not_steps = 400;
  std::size_t not_hidden = 32;
  int vtm_steps = 400;
  std::size_t vtm_pairs = 256;
  double frame_jitter = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    require(classes >= 2 && embed_dim >= 2 && cells >= 1 && cells <= 4, ErrorKind::usage, "invalid-world",
            "need classes >= 2, embed_dim >= 2, cells in [1, 4]");
    require(schedule_steps >= 8, ErrorKind::usage, "invalid-world", "schedule_steps must be >= 8");
    require(label_noise >= 0.0 && label_noise <= 1.0, ErrorKind::usage, "invalid-world", "label_noise in [0, 1]");
    require(pretrain_steps >= 0 && not_steps >= 0 && vtm_steps >= 0, ErrorKind::usage, "invalid-world",
            "step counts must be >= 0");
    require(hidden >= 1 && not_hidden >= 1 && pretrain_batch >= 1 && vtm_pairs >= 2, ErrorKind::usage,
            "invalid-world", "sizes must be positive");
  }
};

inline nlohmann::json to_json(const WorldConfig& c) {
  return {{"classes", c.classes},
          {"embed_dim", c.embed_dim},
          {"cells", c.cells},
          {"schedule_steps", c.schedule_steps},
          {"t_min", c.t_min},
          {"t_max", c.t_max},
          {"skip", c.skip},
          {"radius", c.radius},
          {"mode_sep", c.mode_sep},
          {"mode_std", c.mode_std},
          {"feat_scale", c.feat_scale},
          {"text_offset", c.text_offset},
          {"caption_noise", c.caption_noise},
          {"label_noise", c.label_noise},
          {"hidden", c.hidden},
          {"pretrain_steps", c.pretrain_steps},
          {"pretrain_batch", c.pretrain_batch},
          {"pretrain_lr", c.pretrain_lr},
          {"not_steps", c.not_steps},
          {"not_hidden", c.not_hidden},
          {"vtm_steps", c.vtm_steps},
          {"vtm_pairs", c.vtm_pairs},
          {"frame_jitter", c.frame_jitter},
          {"seed", c.seed}};
}

inline WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig c;
  try {
    require(j.is_object(), ErrorKind::usage, "invalid-world", "world config must be a JSON object");
    for (const auto& [key, _] : j.items())
      require(to_json(c).contains(key), ErrorKind::usage, "invalid-world", "unknown world key: " + key);
    c.classes = j.value("classes", c.classes);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.cells = j.value("cells", c.cells);
    c.schedule_steps = j.value("schedule_steps", c.schedule_steps);
    c.t_min = j.value("t_min", c.t_min);
    c.t_max = j.value("t_max", c.t_max);
    c.skip = j.value("skip", c.skip);
    c.radius = j.value("radius", c.radius);
    c.mode_sep = j.value("mode_sep", c.mode_sep);
    c.mode_std = j.value("mode_std", c.mode_std);
    c.feat_scale = j.value("feat_scale", c.feat_scale);
    c.text_offset = j.value("text_offset", c.text_offset);
    c.caption_noise = j.value("caption_noise", c.caption_noise);
    c.label_noise = j.value("label_noise", c.label_noise);
    c.hidden = j.value("hidden", c.hidden);
    c.pretrain_steps = j.value("pretrain_steps", c.pretrain_steps);
    c.pretrain_batch = j.value("pretrain_batch", c.pretrain_batch);
    c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
    c.not_steps = j.value("not_steps", c.not_steps);
    c.not_hidden = j.value("not_hidden", c.not_hidden);
    c.vtm_steps = j.value("vtm_steps", c.vtm_steps);
    c.vtm_pairs = j.value("vtm_pairs", c.vtm_pairs);
    c.frame_jitter = j.value("frame_jitter", c.frame_jitter);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::usage, "invalid-world", e.what());
  }
  c.validate();
  return c;
}

inline constexpr std::size_t kFrames = 4;
inline constexpr std::size_t kTextTokens = 4;

struct ToyWorld {
  WorldConfig cfg;
  NoiseSchedule schedule;
  Mat modes;     // (classes * 2) x 2 mixture means
  Mat feat_w;    // embed_dim x 2
  Mat cell_offsets;  // cells^2 x 2, latent shift per spatial cell
  std::vector<Mat> text_tokens;  // per class, kTextTokens x embed_dim
  Mat text_cls;                  // classes x embed_dim
  Mat mapped_cls;                // T*(text_cls)
  OtMapArtifact otmap;
  VtmHead vtm;
  PatchGrid grid;
  SemanticConfig semantic;
  ToyDenoiser denoiser;  // pretrained

  std::size_t classes() const { return cfg.classes; }
  std::size_t dim() const { return cfg.embed_dim; }
  std::size_t patches() const { return grid.size(); }
};

template <class Rng>
Vec sample_data(const ToyWorld& w, std::uint32_t c, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> nd(0.0, w.cfg.mode_std);
  const std::size_t m = 2 * c + (coin(rng) ? 1 : 0);
  return {w.modes(m, 0) + nd(rng), w.modes(m, 1) + nd(rng)};
}

// phi_v(z) = tanh(W z)
inline Vec featurize(const ToyWorld& w, std::span<const double> z) {
  Vec out(w.dim());
  for (std::size_t k = 0; k < w.dim(); ++k) out[k] = std::tanh(w.feat_w(k, 0) * z[0] + w.feat_w(k, 1) * z[1]);
  return out;
}

// J^T u at z.
inline Vec featurize_vjp(const ToyWorld& w, std::span<const double> z, std::span<const double> u) {
  const Vec f = featurize(w, z);
  Vec g(kLatentDim, 0.0);
  for (std::size_t k = 0; k < w.dim(); ++k) {
    const double d = u[k] * (1.0 - f[k] * f[k]);
    g[0] += d * w.feat_w(k, 0);
    g[1] += d * w.feat_w(k, 1);
  }
  return g;
}

// Patch tokens for F frames (frame-major, then cell raster order).
inline Mat patch_tokens(const ToyWorld& w, const std::vector<Vec>& frames) {
  const std::size_t per = w.cell_offsets.rows;
  Mat x(frames.size() * per, w.dim());
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (std::size_t c = 0; c < per; ++c) {
      const Vec z{frames[f][0] + w.cell_offsets(c, 0), frames[f][1] + w.cell_offsets(c, 1)};
      const Vec phi = featurize(w, z);
      std::copy(phi.begin(), phi.end(), x.row(f * per + c).begin());
    }
  return x;
}

// Gradient w.r.t. each frame given the gradient w.r.t. its patch tokens.
inline std::vector<Vec> patch_tokens_vjp(const ToyWorld& w, const std::vector<Vec>& frames, const Mat& d_tokens) {
  const std::size_t per = w.cell_offsets.rows;
  std::vector<Vec> out(frames.size(), Vec(kLatentDim, 0.0));
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (std::size_t c = 0; c < per; ++c) {
      const Vec z{frames[f][0] + w.cell_offsets(c, 0), frames[f][1] + w.cell_offsets(c, 1)};
      const Vec g = featurize_vjp(w, z, d_tokens.row(f * per + c));
      out[f][0] += g[0];
      out[f][1] += g[1];
    }
  return out;
}

// Vanilla cross attention softmax(Y X^T / sqrt(e)).
inline Mat vanilla_attention(const Mat& text, const Mat& patches) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(text.cols));
  Mat a(text.rows, patches.rows);
  Vec row(patches.rows);
  for (std::size_t i = 0; i < text.rows; ++i) {
    for (std::size_t j = 0; j < patches.rows; ++j) row[j] = scale * dot(text.row(i), patches.row(j));
    const Vec s = softmax(row);
    std::copy(s.begin(), s.end(), a.row(i).begin());
  }
  return a;
}

// Gradient w.r.t. the patch tokens given the gradient w.r.t. the attention.
inline Mat vanilla_attention_vjp(const Mat& text, const Mat& attn, const Mat& d_attn) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(text.cols));
  Mat d_patches(attn.cols, text.cols);
  for (std::size_t i = 0; i < attn.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < attn.cols; ++j) s += attn(i, j) * d_attn(i, j);
    for (std::size_t j = 0; j < attn.cols; ++j) {
      const double ds = attn(i, j) * (d_attn(i, j) - s) * scale;
      for (std::size_t k = 0; k < text.cols; ++k) d_patches(j, k) += ds * text(i, k);
    }
  }
  return d_patches;
}

struct WorldRewards {
  double quality = 0.0;
  double semantic = 0.5;
  SemanticTrace trace;
};

// Rewards for one generated clip: `frames` are the kFrames previews, `clean`
// is the final clean estimate.
inline WorldRewards score_clip(const ToyWorld& w, std::uint32_t c, const std::vector<Vec>& frames,
                               std::span<const double> clean, const Mat* frozen_plan = nullptr) {
  WorldRewards r;
  r.quality = cosine(w.mapped_cls.row(c), featurize(w, clean));
  const Mat x = patch_tokens(w, frames);
  const Mat a = vanilla_attention(w.text_tokens[c], x);
  r.trace = semantic_reward_trace(w.text_tokens[c], x, a, w.grid, w.semantic, w.vtm, frozen_plan);
  r.semantic = r.trace.reward;
  return r;
}

namespace detail {

template <class Rng>
std::vector<Vec> real_clip(const ToyWorld& w, std::uint32_t c, Rng& rng) {
  std::normal_distribution<double> nd(0.0, w.cfg.frame_jitter);
  const Vec x0 = sample_data(w, c, rng);
  std::vector<Vec> frames(kFrames);
  for (auto& f : frames) f = {x0[0] + nd(rng), x0[1] + nd(rng)};
  return frames;
}

inline Vec vtm_features(const ToyWorld& w, std::uint32_t text_class, const std::vector<Vec>& frames) {
  const Mat x = patch_tokens(w, frames);
  const Mat a = vanilla_attention(w.text_tokens[text_class], x);
  return semantic_reward_trace(w.text_tokens[text_class], x, a, w.grid, w.semantic, w.vtm).features;
}

template <class Rng>
void train_vtm(ToyWorld& w, Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.classes() - 1));
  w.vtm = VtmHead(w.dim());  // features do not depend on the head
  std::vector<Vec> feats;
  std::vector<int> labels;
  for (std::size_t p = 0; p < w.cfg.vtm_pairs; ++p) {
    const std::uint32_t c = pick(rng);
    const auto clip = real_clip(w, c, rng);
    feats.push_back(vtm_features(w, c, clip));
    labels.push_back(1);
    std::uint32_t other = pick(rng);
    while (other == c) other = pick(rng);
    feats.push_back(vtm_features(w, other, clip));
    labels.push_back(0);
  }
  // Logistic regression on the logit difference, full batch Adam.
  const std::size_t d = w.dim();
  std::vector<double> params(d + 1, 0.0), grads(d + 1);
  Adam opt;
  opt.lr = 0.05;
  for (int it = 0; it < w.cfg.vtm_steps; ++it) {
    std::fill(grads.begin(), grads.end(), 0.0);
    for (std::size_t n = 0; n < feats.size(); ++n) {
      double z = params[d];
      for (std::size_t k = 0; k < d; ++k) z += params[k] * feats[n][k];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double g = (p - labels[n]) / static_cast<double>(feats.size());
      for (std::size_t k = 0; k < d; ++k) grads[k] += g * feats[n][k];
      grads[d] += g;
    }
    opt.step(params, grads);
  }
  for (std::size_t k = 0; k < d; ++k) w.vtm.weight(1, k) = params[k];
  w.vtm.bias[1] = params[d];
}

template <class Rng>
void pretrain(ToyWorld& w, Rng& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(w.classes() - 1));
  std::uniform_int_distribution<std::size_t> tpick(0, w.schedule.size() - 1);
  std::bernoulli_distribution noisy(w.cfg.label_noise);
  std::normal_distribution<double> nd;
  Adam opt;
  opt.lr = w.cfg.pretrain_lr;
  const std::size_t b = w.cfg.pretrain_batch;
  Mat z(b, kLatentDim), target(b, kLatentDim);
  std::vector<std::uint32_t> cls(b);
  std::vector<double> ts(b);
  for (int step = 0; step < w.cfg.pretrain_steps; ++step) {
    for (std::size_t r = 0; r < b; ++r) {
      const std::uint32_t c = pick(rng);
      const Vec x0 = sample_data(w, c, rng);
      cls[r] = noisy(rng) ? pick(rng) : c;
      ts[r] = w.schedule.t(tpick(rng));
      for (std::size_t k = 0; k < kLatentDim; ++k) {
        target(r, k) = nd(rng);
        z(r, k) = w.schedule.alpha(ts[r]) * x0[k] + w.schedule.beta(ts[r]) * target(r, k);
      }
    }
    Tape tape;
    const Mat e = w.denoiser.eps(z, cls, ts, &tape);
    Mat up(b, kLatentDim);
    for (std::size_t i = 0; i < up.data.size(); ++i)
      up.data[i] = 2.0 * (e.data[i] - target.data[i]) / static_cast<double>(b);
    w.denoiser.net.zero_grad();
    w.denoiser.net.backward(tape, up);
    opt.step(w.denoiser.net.params(), w.denoiser.net.grads());
  }
  w.denoiser.net.zero_grad();
  w.denoiser.ema = w.denoiser.net;
  w.denoiser.teacher = w.denoiser.net;
}

}  // namespace detail

inline ToyWorld setup_world(const WorldConfig& cfg) {
  cfg.validate();
  ToyWorld w;
  w.cfg = cfg;
  w.schedule = NoiseSchedule::linear(cfg.schedule_steps, cfg.t_min, cfg.t_max, cfg.skip);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd;

  w.modes = Mat(2 * cfg.classes, kLatentDim);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(cfg.classes);
    const double cx = cfg.radius * std::cos(th), cy = cfg.radius * std::sin(th);
    const double tx = -std::sin(th) * cfg.mode_sep, ty = std::cos(th) * cfg.mode_sep;
    w.modes(2 * c, 0) = cx + tx;
    w.modes(2 * c, 1) = cy + ty;
    w.modes(2 * c + 1, 0) = cx - tx;
    w.modes(2 * c + 1, 1) = cy - ty;
  }
  w.feat_w = Mat(cfg.embed_dim, kLatentDim);
  for (double& v : w.feat_w.data) v = cfg.feat_scale * nd(rng);

  w.cell_offsets = Mat(cfg.cells * cfg.cells, kLatentDim);
  if (cfg.cells > 1)
    for (std::size_t r = 0; r < cfg.cells; ++r)
      for (std::size_t q = 0; q < cfg.cells; ++q) {
        w.cell_offsets(r * cfg.cells + q, 0) = 0.3 * (static_cast<double>(q) - 0.5 * static_cast<double>(cfg.cells - 1));
        w.cell_offsets(r * cfg.cells + q, 1) = 0.3 * (static_cast<double>(r) - 0.5 * static_cast<double>(cfg.cells - 1));
      }
  w.grid = PatchGrid::regular(kFrames, cfg.cells, cfg.cells);

  // Text tokens: featurized class representatives, then translated away.
  Vec offset(cfg.embed_dim);
  for (double& v : offset) v = nd(rng);
  const double on = norm(offset);
  for (double& v : offset) v *= cfg.text_offset / on;
  w.text_tokens.assign(cfg.classes, Mat(kTextTokens, cfg.embed_dim));
  w.text_cls = Mat(cfg.classes, cfg.embed_dim);
  for (std::size_t c = 0; c < cfg.classes; ++c)
    for (std::size_t t = 0; t < kTextTokens; ++t) {
      const std::size_t m = 2 * c + (t % 2);
      const double shrink = t < 2 ? 1.0 : 0.85;
      const Vec rep{w.modes(m, 0) * shrink, w.modes(m, 1) * shrink};
      const Vec phi = featurize(w, rep);
      for (std::size_t k = 0; k < cfg.embed_dim; ++k) {
        w.text_tokens[c](t, k) = phi[k] + offset[k];
        w.text_cls(c, k) += (phi[k] + offset[k]) / static_cast<double>(kTextTokens);
      }
    }

  // OT map from noisy captions to real-video embeddings.
  const std::size_t n_emb = 250 * cfg.classes;
  EmbeddingSet text{Modality::text, Mat(n_emb, cfg.embed_dim), std::nullopt};
  EmbeddingSet video{Modality::video, Mat(n_emb, cfg.embed_dim), std::nullopt};
  for (std::size_t r = 0; r < n_emb; ++r) {
    const auto c = static_cast<std::uint32_t>(r % cfg.classes);
    for (std::size_t k = 0; k < cfg.embed_dim; ++k)
      text.vectors(r, k) = w.text_cls(c, k) + cfg.caption_noise * nd(rng);
    const Vec phi = featurize(w, sample_data(w, c, rng));
    std::copy(phi.begin(), phi.end(), video.vectors.row(r).begin());
  }
  NotTrainConfig nc;
  nc.steps = cfg.not_steps;
  nc.hidden = cfg.not_hidden;
  nc.seed = cfg.seed + 1;
  w.otmap = train_not(text, video, nc);
  w.mapped_cls = w.otmap.apply(w.text_cls);

  detail::train_vtm(w, rng);

  w.denoiser = ToyDenoiser(cfg.classes, cfg.hidden);
  w.denoiser.init(rng);
  detail::pretrain(w, rng);
  return w;
}

}  // namespace pisces
