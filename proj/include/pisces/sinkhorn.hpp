// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Partial optimal transport through the entropic, unbalanced Sinkhorn
// iteration. All scaling updates run in the log domain; the plan is
// exponentiated once at the end.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "pisces/numerics.hpp"

namespace pisces {

struct PartialOTConfig {
  double epsilon = 0.05;
  double mass = 0.9;
  int max_iters = 500;
  double tol = 1e-9;

  void validate() const {
    require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::usage, "invalid-epsilon", "epsilon must be > 0");
    require(mass > 0.0 && mass <= 1.0, ErrorKind::usage, "invalid-mass", "mass must lie in (0, 1]");
    require(max_iters >= 1, ErrorKind::usage, "invalid-iters", "max_iters must be >= 1");
    require(tol > 0.0, ErrorKind::usage, "invalid-tol", "tol must be > 0");
  }
};

struct Relaxation {
  double rho = std::numeric_limits<double>::infinity();
  double tau_a = 1.0;
  double tau_b = 1.0;

  bool balanced() const { return std::isinf(rho); }
};

struct TransportPlan {
  Mat plan;
  int iters_used = 0;
  double marginal_residual = 0.0;
  double transported_mass = 0.0;
  bool converged = false;
};

// Fractions at or above 0.999 are treated as full (balanced) transport.
inline Relaxation mass_to_relaxation(double mass, double epsilon) {
  require(mass > 0.0 && mass <= 1.0, ErrorKind::usage, "invalid-mass", "mass must lie in (0, 1]");
  require(epsilon > 0.0, ErrorKind::usage, "invalid-epsilon", "epsilon must be > 0");
  Relaxation r;
  if (mass >= 0.999) return r;
  r.rho = epsilon * mass / (1.0 - mass);
  r.tau_a = r.tau_b = r.rho / (r.rho + epsilon);
  return r;
}

inline TransportPlan solve_partial_ot(const Mat& cost, const PartialOTConfig& cfg) {
  cfg.validate();
  require(cost.rows > 0 && cost.cols > 0, ErrorKind::data, "empty-input", "empty cost matrix");
  require(all_finite(cost.data), ErrorKind::numeric, "bad-cost", "cost matrix has non-finite entries");

  const std::size_t n = cost.rows, m = cost.cols;
  const Relaxation relax = mass_to_relaxation(cfg.mass, cfg.epsilon);
  const double log_mu = -std::log(static_cast<double>(n));
  const double log_nu = -std::log(static_cast<double>(m));

  // Kernel relative to mu x nu. Balanced plans are unaffected (the constant
  // is absorbed by the scalings); with tau < 1 it keeps the mass <= 1.
  Mat log_k(n, m);
  for (std::size_t i = 0; i < cost.data.size(); ++i) log_k.data[i] = -cost.data[i] / cfg.epsilon + log_mu + log_nu;

  Vec log_u(n, 0.0), log_v(m, 0.0), log_u_new(n), log_v_new(m);
  Vec scratch(std::max(n, m));

  TransportPlan out;
  int it = 0;
  for (it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) scratch[j] = log_k(i, j) + log_v[j];
      log_u_new[i] = relax.tau_a * (log_mu - logsumexp(std::span<const double>(scratch.data(), m)));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = log_k(i, j) + log_u_new[i];
      log_v_new[j] = relax.tau_b * (log_nu - logsumexp(std::span<const double>(scratch.data(), n)));
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(log_u_new[i] - log_u[i]));
    for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(log_v_new[j] - log_v[j]));
    log_u.swap(log_u_new);
    log_v.swap(log_v_new);
    if (change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.iters_used = std::min(it, cfg.max_iters);

  out.plan = Mat(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.plan(i, j) = std::exp(log_u[i] + log_k(i, j) + log_v[j]);

  double total = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += out.plan(i, j);
    total += r;
    resid = std::max(resid, std::abs(r - 1.0 / static_cast<double>(n)));
  }
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += out.plan(i, j);
    resid = std::max(resid, std::abs(c - 1.0 / static_cast<double>(m)));
  }
  out.transported_mass = total;
  out.marginal_residual = resid;
  return out;
}

inline double plan_cost(const Mat& plan, const Mat& cost) {
  require_same_shape(plan, cost, "plan_cost");
  double s = 0.0;
  for (std::size_t i = 0; i < plan.data.size(); ++i) s += plan.data[i] * cost.data[i];
  return s;
}

inline double plan_cost(const TransportPlan& p, const Mat& cost) { return plan_cost(p.plan, cost); }

}  // namespace pisces
