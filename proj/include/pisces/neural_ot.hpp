// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Neural optimal transport between two embedding populations with quadratic
// cost. A map network T and a potential network f play the max-min game
//
//   sup_f inf_T  E_x[f(x)] + E_y[ ||y - T(y)||^2 - f(T(y)) ]
//
// and are trained by alternating K_T map steps (f frozen) with one potential
// step (T frozen).

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/embedding.hpp"
#include "pisces/ffn.hpp"
#include "pisces/io.hpp"

namespace pisces {

struct NotTrainConfig {
  int inner_iters = 10;  // K_T
  int steps = 1000;
  std::size_t batch = 128;
  double lr_map = 5e-3;
  double lr_potential = 5e-3;
  bool linear_decay = true;  // step sizes shrink linearly to 0 over `steps`
  std::size_t hidden = 64;
  std::uint64_t seed = 0;

  void validate() const {
    require(inner_iters >= 1, ErrorKind::usage, "invalid-config", "inner_iters must be >= 1");
    require(steps >= 0, ErrorKind::usage, "invalid-config", "steps must be >= 0");
    require(batch >= 2, ErrorKind::usage, "invalid-config", "batch must be >= 2");
    require(lr_map > 0.0 && lr_potential > 0.0, ErrorKind::usage, "invalid-config", "learning rates must be > 0");
    require(hidden >= 1, ErrorKind::usage, "invalid-config", "hidden must be >= 1");
  }
};

inline nlohmann::json to_json(const NotTrainConfig& c) {
  return {{"inner_iters", c.inner_iters}, {"steps", c.steps},         {"batch", c.batch},
          {"lr_map", c.lr_map},           {"lr_potential", c.lr_potential}, {"linear_decay", c.linear_decay},
          {"hidden", c.hidden},           {"seed", c.seed}};
}

inline NotTrainConfig not_config_from_json(const nlohmann::json& j) {
  NotTrainConfig c;
  c.inner_iters = j.value("inner_iters", c.inner_iters);
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr_map = j.value("lr_map", c.lr_map);
  c.lr_potential = j.value("lr_potential", c.lr_potential);
  c.linear_decay = j.value("linear_decay", c.linear_decay);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct NotCurvePoint {
  double map_loss;
  double potential_loss;
};

struct OtMapArtifact {
  FeedForwardNet map;
  std::vector<NotCurvePoint> curve;
  NotTrainConfig config;

  std::size_t in_dim() const { return map.in_dim(); }
  std::size_t out_dim() const { return map.out_dim(); }

  Mat apply(const Mat& y) const { return map.forward(y); }
  Vec apply(std::span<const double> y) const {
    Mat row(1, y.size());
    std::copy(y.begin(), y.end(), row.data.begin());
    return map.forward(row).data;
  }
};

inline Mat forward_map(const FeedForwardNet& net, const Mat& y) { return net.forward(y); }

// Mean over the batch of ||y - T(y)||^2 - f(T(y)).
inline double map_loss(const FeedForwardNet& map, const FeedForwardNet& potential, const Mat& ys) {
  require(ys.rows > 0, ErrorKind::data, "empty-set", "map_loss on empty batch");
  const Mat ty = map.forward(ys);
  require(ty.cols == ys.cols, ErrorKind::data, "shape-mismatch", "quadratic cost needs equal in/out dims");
  const Mat fty = potential.forward(ty);
  double s = 0.0;
  for (std::size_t r = 0; r < ys.rows; ++r) {
    double c = 0.0;
    for (std::size_t k = 0; k < ys.cols; ++k) c += (ys(r, k) - ty(r, k)) * (ys(r, k) - ty(r, k));
    s += c - fty(r, 0);
  }
  return s / static_cast<double>(ys.rows);
}

// Mean f(T(y)) over Y minus mean f(x) over X.
inline double potential_loss(const FeedForwardNet& map, const FeedForwardNet& potential, const Mat& xs,
                             const Mat& ys) {
  require(xs.rows > 0 && ys.rows > 0, ErrorKind::data, "empty-set", "potential_loss on empty batch");
  const Mat fty = potential.forward(map.forward(ys));
  const Mat fx = potential.forward(xs);
  double a = 0.0, b = 0.0;
  for (double v : fty.data) a += v;
  for (double v : fx.data) b += v;
  return a / static_cast<double>(ys.rows) - b / static_cast<double>(xs.rows);
}

// Fills map.grads() with d map_loss / d psi. The potential's gradient buffer
// is left zeroed.
inline double map_loss_backward(FeedForwardNet& map, FeedForwardNet& potential, const Mat& ys) {
  const double inv_b = 1.0 / static_cast<double>(ys.rows);
  Tape map_tape, pot_tape;
  const Mat ty = map.forward(ys, &map_tape);
  const Mat fty = potential.forward(ty, &pot_tape);
  potential.zero_grad();
  const Mat df_dty = potential.backward(pot_tape, Mat(ys.rows, 1, -inv_b));
  potential.zero_grad();
  Mat upstream(ty.rows, ty.cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < ys.rows; ++r) {
    for (std::size_t k = 0; k < ys.cols; ++k) {
      const double d = ty(r, k) - ys(r, k);
      loss += d * d;
      upstream(r, k) = 2.0 * d * inv_b + df_dty(r, k);
    }
    loss -= fty(r, 0);
  }
  map.zero_grad();
  map.backward(map_tape, upstream);
  return loss * inv_b;
}

// Fills potential.grads() with d potential_loss / d omega.
inline double potential_loss_backward(const FeedForwardNet& map, FeedForwardNet& potential, const Mat& xs,
                                      const Mat& ys) {
  const Mat ty = map.forward(ys);
  Tape t_mapped, t_real;
  const Mat f_mapped = potential.forward(ty, &t_mapped);
  const Mat f_real = potential.forward(xs, &t_real);
  potential.zero_grad();
  potential.backward(t_mapped, Mat(ys.rows, 1, 1.0 / static_cast<double>(ys.rows)));
  potential.backward(t_real, Mat(xs.rows, 1, -1.0 / static_cast<double>(xs.rows)));
  double a = 0.0, b = 0.0;
  for (double v : f_mapped.data) a += v;
  for (double v : f_real.data) b += v;
  return a / static_cast<double>(ys.rows) - b / static_cast<double>(xs.rows);
}

namespace detail {
template <class Rng>
Mat sample_rows(const Mat& src, std::size_t count, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, src.rows - 1);
  Mat out(count, src.cols);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t i = pick(rng);
    std::copy(src.row(i).begin(), src.row(i).end(), out.row(r).begin());
  }
  return out;
}
}  // namespace detail

inline OtMapArtifact train_not(const EmbeddingSet& text, const EmbeddingSet& video, const NotTrainConfig& cfg) {
  cfg.validate();
  text.validate();
  video.validate();
  require(text.dim() == video.dim(), ErrorKind::data, "shape-mismatch",
          "quadratic transport cost needs text and video embeddings of equal dim");

  std::mt19937_64 rng(cfg.seed);
  OtMapArtifact art{FeedForwardNet(text.dim(), cfg.hidden, video.dim()), {}, cfg};
  FeedForwardNet potential(video.dim(), cfg.hidden, 1);
  art.map.init(rng);
  potential.init(rng, 0.1);

  art.curve.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const double scale = cfg.linear_decay ? 1.0 - static_cast<double>(step) / cfg.steps : 1.0;
    double lt = 0.0;
    for (int k = 0; k < cfg.inner_iters; ++k) {
      const Mat ys = detail::sample_rows(text.vectors, cfg.batch, rng);
      lt = map_loss_backward(art.map, potential, ys);
      sgd_step(art.map, cfg.lr_map * scale);
    }
    const Mat xs = detail::sample_rows(video.vectors, cfg.batch, rng);
    const Mat ys = detail::sample_rows(text.vectors, cfg.batch, rng);
    const double lf = potential_loss_backward(art.map, potential, xs, ys);
    sgd_step(potential, cfg.lr_potential * scale);
    art.curve.push_back({lt, lf});
  }
  art.map.zero_grad();
  return art;
}

// ---- OTMAP1 serialization -------------------------------------------------
//
//   "OTMAP1" | u32 in | u32 hidden | u32 out | u64 n_params | f64[n_params]
//   | u64 n_steps | f64[2 * n_steps] (map_loss, potential_loss) | u64 len | JSON

inline std::string serialize(const OtMapArtifact& a) {
  io::ByteWriter w;
  w.raw("OTMAP1");
  w.u32(static_cast<std::uint32_t>(a.map.in_dim()));
  w.u32(static_cast<std::uint32_t>(a.map.hidden()));
  w.u32(static_cast<std::uint32_t>(a.map.out_dim()));
  w.u64(a.map.params().size());
  w.f64s(a.map.params());
  w.u64(a.curve.size());
  for (const auto& p : a.curve) {
    w.f64(p.map_loss);
    w.f64(p.potential_loss);
  }
  const std::string js = to_json(a.config).dump();
  w.u64(js.size());
  w.raw(js);
  return w.bytes();
}

inline OtMapArtifact deserialize_otmap(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  if (r.remaining() < 6 || r.raw(6) != "OTMAP1") throw Error(ErrorKind::data, "bad-magic", "not an OTMAP1 file");
  const std::uint32_t in = r.u32(), hidden = r.u32(), out = r.u32();
  require(in >= 1 && hidden >= 1 && out >= 1 && in <= (1u << 16) && hidden <= (1u << 16) && out <= (1u << 16),
          ErrorKind::data, "dim-overflow", "implausible network dims");
  OtMapArtifact a{FeedForwardNet(in, hidden, out), {}, {}};
  const std::uint64_t n = r.u64();
  require(n == a.map.params().size(), ErrorKind::data, "shape-mismatch", "parameter count does not match dims");
  a.map.params() = r.f64s(n);
  const std::uint64_t steps = r.u64();
  r.need_items(steps, 16);
  a.curve.resize(steps);
  for (auto& p : a.curve) {
    p.map_loss = r.f64();
    p.potential_loss = r.f64();
  }
  const std::uint64_t len = r.u64();
  r.need_items(len, 1);
  try {
    a.config = not_config_from_json(nlohmann::json::parse(r.raw(len)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, "bad-config", e.what());
  }
  return a;
}

inline void save_otmap(const OtMapArtifact& a, const std::string& path) { io::write_file(path, serialize(a)); }
inline OtMapArtifact load_otmap(const std::string& path) { return deserialize_otmap(io::read_file(path)); }

}  // namespace pisces
