// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Class-conditional noise predictor eps_theta(z, c, t) with its EMA target
// and a frozen copy of the pretrained weights used as the ODE teacher, plus
// the consistency function g built from it and the CD loss.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pisces/ffn.hpp"
#include "pisces/posttrain/schedule.hpp"

namespace pisces {

inline constexpr std::size_t kLatentDim = 2;

struct ToyDenoiser {
  FeedForwardNet net;  // theta
  FeedForwardNet ema;  // theta^-
  FeedForwardNet teacher;  // phi, frozen
  double lambda = 0.95;
  std::size_t classes = 0;

  ToyDenoiser() = default;
  ToyDenoiser(std::size_t num_classes, std::size_t hidden)
      : net(kLatentDim + num_classes + 1, hidden, kLatentDim),
        ema(kLatentDim + num_classes + 1, hidden, kLatentDim),
        teacher(kLatentDim + num_classes + 1, hidden, kLatentDim),
        classes(num_classes) {}

  template <class Rng>
  void init(Rng& rng) {
    net.init(rng);
    ema = net;
    teacher = net;
  }

  // Rows [z, onehot(c), t].
  Mat input(const Mat& z, std::span<const std::uint32_t> cls, std::span<const double> t) const {
    require(z.cols == kLatentDim && cls.size() == z.rows && t.size() == z.rows, ErrorKind::data, "shape-mismatch",
            "denoiser input batch");
    Mat x(z.rows, kLatentDim + classes + 1);
    for (std::size_t r = 0; r < z.rows; ++r) {
      require(cls[r] < classes, ErrorKind::data, "bad-class", "prompt class out of range");
      x(r, 0) = z(r, 0);
      x(r, 1) = z(r, 1);
      x(r, kLatentDim + cls[r]) = 1.0;
      x(r, kLatentDim + classes) = t[r];
    }
    return x;
  }

  Mat eps(const Mat& z, std::span<const std::uint32_t> cls, std::span<const double> t, Tape* tape = nullptr) const {
    return net.forward(input(z, cls, t), tape);
  }
  Mat eps_target(const Mat& z, std::span<const std::uint32_t> cls, std::span<const double> t) const {
    return ema.forward(input(z, cls, t));
  }
  Mat eps_teacher(const Mat& z, std::span<const std::uint32_t> cls, std::span<const double> t) const {
    return teacher.forward(input(z, cls, t));
  }

  Vec eps_at(std::span<const double> z, std::uint32_t c, double t, bool target = false) const {
    Mat zm(1, kLatentDim);
    std::copy(z.begin(), z.end(), zm.data.begin());
    const std::uint32_t cc[1] = {c};
    const double tt[1] = {t};
    return (target ? eps_target(zm, cc, tt) : eps(zm, cc, tt)).data;
  }
};

inline Vec ode_step(const NoiseSchedule& s, std::span<const double> z, double t_from, double t_to,
                    const ToyDenoiser& d, std::uint32_t prompt) {
  require(z.size() == kLatentDim, ErrorKind::data, "shape-mismatch", "latent must be 2-D");
  require(s.on_grid(t_from) && s.on_grid(t_to), ErrorKind::usage, "off-grid", "ode_step times must be on the grid");
  return ode_step(s, z, d.eps_at(z, prompt, t_from), t_from, t_to);
}

inline Vec single_step_to_zero(const NoiseSchedule& s, std::span<const double> z, double t, const ToyDenoiser& d,
                               std::uint32_t prompt, bool target = false) {
  require(z.size() == kLatentDim, ErrorKind::data, "shape-mismatch", "latent must be 2-D");
  require(s.on_grid(t), ErrorKind::usage, "off-grid", "single_step_to_zero time must be on the grid");
  return single_step_to_zero(s, z, d.eps_at(z, prompt, t, target), t);
}

// Mean over rows of the squared Euclidean distance.
inline double cd_loss(const Mat& student, const Mat& target) {
  require_same_shape(student, target, "cd_loss");
  require(student.rows > 0, ErrorKind::data, "empty-input", "cd_loss on empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < student.data.size(); ++i) {
    const double d = student.data[i] - target.data[i];
    s += d * d;
  }
  return s / static_cast<double>(student.rows);
}

// d( g_theta(z_hi, t_hi), g_theta-(z_lo, t_lo) ) for one sample.
inline double cd_loss(const NoiseSchedule& s, const ToyDenoiser& d, std::uint32_t prompt,
                      std::span<const double> z_hi, double t_hi, std::span<const double> z_lo, double t_lo) {
  const Vec a = single_step_to_zero(s, z_hi, t_hi, d, prompt);
  const Vec b = single_step_to_zero(s, z_lo, t_lo, d, prompt, true);
  double r = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) r += (a[k] - b[k]) * (a[k] - b[k]);
  return r;
}

inline void ema_update(const FeedForwardNet& theta, FeedForwardNet& target, double lambda) {
  require(lambda > 0.0 && lambda <= 1.0, ErrorKind::usage, "invalid-lambda", "EMA rate must be in (0, 1]");
  require(theta.params().size() == target.params().size() && theta.in_dim() == target.in_dim() &&
              theta.hidden() == target.hidden(),
          ErrorKind::data, "shape-mismatch", "EMA target is not congruent with theta");
  auto& p = target.params();
  const auto& q = theta.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = lambda * q[i] + (1.0 - lambda) * p[i];
}

inline void ema_update(ToyDenoiser& d) { ema_update(d.net, d.ema, d.lambda); }

}  // namespace pisces
