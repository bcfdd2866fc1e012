// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Noise schedule z_t = alpha(t) z_0 + beta(t) eps on a discrete time grid, and
// the Euler discretization of the probability-flow ODE
//
//   dz/dt = gamma(t) z + h(t) eps_theta(z, t)
//   gamma = alpha' / alpha,  h = beta' - alpha' beta / alpha
//
// (h plays the role of sigma^2(t)/2 in the epsilon parameterization).

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pisces/numerics.hpp"

namespace pisces {

struct NoiseSchedule {
  std::function<double(double)> alpha, beta, dalpha, dbeta;
  std::vector<double> grid;  // ascending
  int skip = 1;              // k

  static NoiseSchedule linear(std::size_t steps = 40, double t_min = 0.01, double t_max = 0.9, int skip = 1) {
    require(steps >= 2 && t_min > 0.0 && t_max < 1.0 && t_min < t_max, ErrorKind::usage, "invalid-schedule",
            "linear schedule needs 0 < t_min < t_max < 1 and >= 2 steps");
    require(skip >= 1 && static_cast<std::size_t>(skip) < steps, ErrorKind::usage, "invalid-schedule",
            "skip must be in [1, steps)");
    NoiseSchedule s;
    s.alpha = [](double t) { return 1.0 - t; };
    s.beta = [](double t) { return t; };
    s.dalpha = [](double) { return -1.0; };
    s.dbeta = [](double) { return 1.0; };
    for (std::size_t i = 0; i < steps; ++i)
      s.grid.push_back(t_min + (t_max - t_min) * static_cast<double>(i) / static_cast<double>(steps - 1));
    s.skip = skip;
    return s;
  }

  std::size_t size() const { return grid.size(); }
  double t(std::size_t i) const { return grid.at(i); }

  double gamma(double t) const { return dalpha(t) / alpha(t); }
  double h(double t) const { return dbeta(t) - dalpha(t) * beta(t) / alpha(t); }

  std::size_t index_of(double t) const {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (std::abs(grid[i] - t) <= 1e-12) return i;
    throw Error(ErrorKind::usage, "off-grid", "time " + std::to_string(t) + " is not on the schedule grid");
  }
  bool on_grid(double t) const {
    for (double g : grid)
      if (std::abs(g - t) <= 1e-12) return true;
    return false;
  }
};

// Coefficients of one Euler step  z' = a_z * z + a_eps * eps.
struct StepCoeffs {
  double a_z;
  double a_eps;
};

inline StepCoeffs ode_coeffs(const NoiseSchedule& s, double t_from, double t_to) {
  const double dt = t_to - t_from;
  return {1.0 + dt * s.gamma(t_from), dt * s.h(t_from)};
}

// One Euler step of the PF-ODE from t_from down to t_to given eps at (z, t_from).
inline Vec ode_step(const NoiseSchedule& s, std::span<const double> z, std::span<const double> eps, double t_from,
                    double t_to) {
  require(s.on_grid(t_from) && s.on_grid(t_to), ErrorKind::usage, "off-grid", "ode_step times must be on the grid");
  require(t_to <= t_from, ErrorKind::usage, "bad-direction", "ode_step integrates towards t = 0");
  require(z.size() == eps.size(), ErrorKind::data, "shape-mismatch", "ode_step z vs eps");
  const StepCoeffs c = ode_coeffs(s, t_from, t_to);
  Vec out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = c.a_z * z[k] + c.a_eps * eps[k];
  return out;
}

// Single Euler jump from t all the way to 0: the one-step clean estimate.
inline Vec single_step_to_zero(const NoiseSchedule& s, std::span<const double> z, std::span<const double> eps,
                               double t) {
  require(s.on_grid(t), ErrorKind::usage, "off-grid", "single_step_to_zero time must be on the grid");
  require(z.size() == eps.size(), ErrorKind::data, "shape-mismatch", "single_step z vs eps");
  const StepCoeffs c = ode_coeffs(s, t, 0.0);
  Vec out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = c.a_z * z[k] + c.a_eps * eps[k];
  return out;
}

// `count` grid indices from `from` down to 0 (inclusive), evenly spaced and
// rounded; repeated indices are kept so every trajectory has the same length.
inline std::vector<std::size_t> descending_indices(std::size_t from, std::size_t count) {
  std::vector<std::size_t> idx(count + 1);
  for (std::size_t f = 0; f <= count; ++f)
    idx[f] = static_cast<std::size_t>(
        std::lround(static_cast<double>(from) * static_cast<double>(count - f) / static_cast<double>(count)));
  return idx;
}

}  // namespace pisces
