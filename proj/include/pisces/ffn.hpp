// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Three affine layers with layer normalization and ReLU between them:
//
//   x -> W1 x + b1 -> LN(g1, s1) -> ReLU -> W2 . + b2 -> LN(g2, s2) -> ReLU -> W3 . + b3
//
// Parameters and gradients live in two flat, congruent buffers so optimizers,
// EMA updates and serialization can treat the net as one vector.

#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pisces/numerics.hpp"

namespace pisces {

inline constexpr double kLayerNormVarFloor = 1e-5;

struct TensorView {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

// Activations recorded by a forward pass, needed by backward.
struct Tape {
  bool recorded = false;
  Mat input;
  std::array<Mat, 2> normed;   // LN output before gain/shift
  std::array<Vec, 2> inv_std;  // per row
  std::array<Mat, 2> act;      // post-ReLU
};

class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  FeedForwardNet(std::size_t in_dim, std::size_t hidden, std::size_t out_dim)
      : in_(in_dim), hidden_(hidden), out_(out_dim) {
    require(in_dim > 0 && hidden > 0 && out_dim > 0, ErrorKind::usage, "invalid-dims", "net dims must be positive");
    std::size_t off = 0;
    auto add = [&](const char* name, std::size_t n) {
      views_.push_back({name, off, n});
      off += n;
    };
    add("w1", hidden * in_dim);
    add("b1", hidden);
    add("g1", hidden);
    add("s1", hidden);
    add("w2", hidden * hidden);
    add("b2", hidden);
    add("g2", hidden);
    add("s2", hidden);
    add("w3", out_dim * hidden);
    add("b3", out_dim);
    params_.assign(off, 0.0);
    grads_.assign(off, 0.0);
    std::fill_n(param("g1").begin(), hidden, 1.0);
    std::fill_n(param("g2").begin(), hidden, 1.0);
  }

  std::size_t in_dim() const { return in_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t out_dim() const { return out_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  const std::vector<double>& grads() const { return grads_; }
  const std::vector<TensorView>& tensors() const { return views_; }

  const TensorView& view(const std::string& name) const {
    for (const auto& v : views_)
      if (v.name == name) return v;
    throw Error(ErrorKind::usage, "unknown-tensor", name);
  }
  std::span<double> param(const std::string& name) {
    const auto& v = view(name);
    return {params_.data() + v.offset, v.size};
  }
  std::span<const double> param(const std::string& name) const {
    const auto& v = view(name);
    return {params_.data() + v.offset, v.size};
  }
  std::span<double> grad(const std::string& name) {
    const auto& v = view(name);
    return {grads_.data() + v.offset, v.size};
  }

  void zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  // He-normal weights, zero biases, unit gains.
  template <class Rng>
  void init(Rng& rng, double out_scale = 1.0) {
    auto fill = [&](const std::string& name, std::size_t fan_in, double scale) {
      std::normal_distribution<double> nd(0.0, scale * std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (double& w : param(name)) w = nd(rng);
    };
    fill("w1", in_, 1.0);
    fill("w2", hidden_, 1.0);
    fill("w3", hidden_, out_scale);
  }

  Mat forward(const Mat& x, Tape* tape = nullptr) const {
    require(x.cols == in_, ErrorKind::data, "shape-mismatch",
            "net input dim " + std::to_string(in_) + " but got " + std::to_string(x.cols));
    const std::size_t b = x.rows;
    Tape local;
    Tape& t = tape ? *tape : local;
    t.input = x;
    Mat h = x;
    for (int l = 0; l < 2; ++l) {
      const std::size_t fan_in = l == 0 ? in_ : hidden_;
      auto w = param(l == 0 ? "w1" : "w2");
      auto bias = param(l == 0 ? "b1" : "b2");
      auto gain = param(l == 0 ? "g1" : "g2");
      auto shift = param(l == 0 ? "s1" : "s2");
      Mat normed(b, hidden_), act(b, hidden_);
      Vec inv_std(b);
      Vec pre(hidden_);
      for (std::size_t r = 0; r < b; ++r) {
        double mean = 0.0;
        for (std::size_t o = 0; o < hidden_; ++o) {
          double s = bias[o];
          for (std::size_t k = 0; k < fan_in; ++k) s += w[o * fan_in + k] * h(r, k);
          pre[o] = s;
          mean += s;
        }
        mean /= static_cast<double>(hidden_);
        double var = 0.0;
        for (double p : pre) var += (p - mean) * (p - mean);
        var /= static_cast<double>(hidden_);
        inv_std[r] = 1.0 / std::sqrt(var + kLayerNormVarFloor);
        for (std::size_t o = 0; o < hidden_; ++o) {
          normed(r, o) = (pre[o] - mean) * inv_std[r];
          act(r, o) = std::max(0.0, gain[o] * normed(r, o) + shift[o]);
        }
      }
      h = act;
      t.normed[l] = std::move(normed);
      t.inv_std[l] = std::move(inv_std);
      t.act[l] = std::move(act);
    }
    auto w3 = param("w3");
    auto b3 = param("b3");
    Mat y(b, out_);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t o = 0; o < out_; ++o) {
        double s = b3[o];
        for (std::size_t k = 0; k < hidden_; ++k) s += w3[o * hidden_ + k] * h(r, k);
        y(r, o) = s;
      }
    t.recorded = true;
    return y;
  }

  // Accumulates parameter gradients of sum(upstream * output) into grads()
  // and returns the gradient with respect to the recorded input.
  Mat backward(const Tape& tape, const Mat& upstream) {
    require(tape.recorded, ErrorKind::usage, "no-tape", "backward called without a recorded forward pass");
    const std::size_t b = tape.input.rows;
    require(upstream.rows == b && upstream.cols == out_, ErrorKind::data, "shape-mismatch",
            "upstream gradient shape does not match recorded output");

    // Output layer.
    auto w3 = param("w3");
    auto gw3 = grad("w3");
    auto gb3 = grad("b3");
    Mat dh(b, hidden_);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t o = 0; o < out_; ++o) {
        const double u = upstream(r, o);
        if (u == 0.0) continue;
        gb3[o] += u;
        for (std::size_t k = 0; k < hidden_; ++k) {
          gw3[o * hidden_ + k] += u * tape.act[1](r, k);
          dh(r, k) += u * w3[o * hidden_ + k];
        }
      }

    for (int l = 1; l >= 0; --l) {
      const std::size_t fan_in = l == 0 ? in_ : hidden_;
      const Mat& prev = l == 0 ? tape.input : tape.act[0];
      auto w = param(l == 0 ? "w1" : "w2");
      auto gain = param(l == 0 ? "g1" : "g2");
      auto gw = grad(l == 0 ? "w1" : "w2");
      auto gb = grad(l == 0 ? "b1" : "b2");
      auto gg = grad(l == 0 ? "g1" : "g2");
      auto gs = grad(l == 0 ? "s1" : "s2");
      Mat dprev(b, fan_in);
      Vec dn(hidden_), dpre(hidden_);
      for (std::size_t r = 0; r < b; ++r) {
        double mean_dn = 0.0, mean_dn_n = 0.0;
        for (std::size_t o = 0; o < hidden_; ++o) {
          const double n = tape.normed[l](r, o);
          const double dl = tape.act[l](r, o) > 0.0 ? dh(r, o) : 0.0;
          gg[o] += dl * n;
          gs[o] += dl;
          dn[o] = dl * gain[o];
          mean_dn += dn[o];
          mean_dn_n += dn[o] * n;
        }
        mean_dn /= static_cast<double>(hidden_);
        mean_dn_n /= static_cast<double>(hidden_);
        for (std::size_t o = 0; o < hidden_; ++o)
          dpre[o] = tape.inv_std[l][r] * (dn[o] - mean_dn - tape.normed[l](r, o) * mean_dn_n);
        for (std::size_t o = 0; o < hidden_; ++o) {
          const double d = dpre[o];
          if (d == 0.0) continue;
          gb[o] += d;
          for (std::size_t k = 0; k < fan_in; ++k) {
            gw[o * fan_in + k] += d * prev(r, k);
            dprev(r, k) += d * w[o * fan_in + k];
          }
        }
      }
      dh = std::move(dprev);
    }
    return dh;
  }

  friend bool operator==(const FeedForwardNet& a, const FeedForwardNet& b) {
    return a.in_ == b.in_ && a.hidden_ == b.hidden_ && a.out_ == b.out_ && a.params_ == b.params_;
  }

 private:
  std::size_t in_ = 0, hidden_ = 0, out_ = 0;
  std::vector<TensorView> views_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

// Plain gradient descent.
inline void sgd_step(FeedForwardNet& net, double lr) {
  auto& p = net.params();
  const auto& g = net.grads();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

// Adam over a flat parameter vector; the state is sized on first use.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  long step_count = 0;

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
      step_count = 0;
    }
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace pisces
