// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every tolerance, seed and budget is fixed below.

#include <chrono>
#include <cstdio>
#include <string>

#include "cli_cases.hpp"
#include "pisces/pisces.hpp"
#include "support.hpp"

using namespace pisces;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += "[" + what + "] ";
    }
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

PartialOTConfig ot(double eps, double mass) {
  PartialOTConfig c;
  c.epsilon = eps;
  c.mass = mass;
  return c;
}

// 1
Outcome sinkhorn_vs_birkhoff() {
  Outcome o;
  Timer t;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;  // 2..5
    const Mat c = oracle::random_mat(n, n, rng, 0.0, 1.0);
    const double best = oracle::best_permutation_cost(c);
    PartialOTConfig k = ot(0.005, 1.0);
    k.max_iters = 5000;
    const double got = plan_cost(solve_partial_ot(c, k), c);
    const double rel = std::abs(got - best) / best;
    worst = std::max(worst, rel);
    o.check(rel < 0.02, fmt("trial %.0f rel %.4f", trial, rel));
  }
  o.check(t.seconds() < 10.0, fmt("runtime %.1fs", t.seconds()));
  o.detail += fmt("worst rel gap %.5f, %.2fs", worst, t.seconds());
  return o;
}

// 2
Outcome balanced_residual() {
  Outcome o;
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat c = oracle::random_mat(16, 16, rng, 0.0, 1.0);
    PartialOTConfig k = ot(0.05, 1.0);
    k.max_iters = 500;
    const TransportPlan p = solve_partial_ot(c, k);
    worst = std::max(worst, p.marginal_residual);
    o.check(p.marginal_residual < 1e-6, fmt("trial %.0f residual %.3g", trial, p.marginal_residual));
  }
  o.detail += fmt("worst residual %.3g over 20 costs", worst);
  return o;
}

// 3
Outcome mass_monotone_selective() {
  Outcome o;
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 20; ++trial) {
    Mat c = oracle::random_mat(6, 8, rng, 0.0, 0.8);
    const std::size_t bad = static_cast<std::size_t>(trial) % 6;
    for (std::size_t j = 0; j < 8; ++j) c(bad, j) = 1.0;
    double prev = 0.0;
    for (double m : {0.3, 0.5, 0.7, 0.9, 1.0}) {
      const TransportPlan p = solve_partial_ot(c, ot(0.05, m));
      o.check(p.transported_mass >= prev, fmt("trial %.0f mass %.4f < %.4f at m %.1f", trial, p.transported_mass, prev, m));
      prev = p.transported_mass;
      if (m == 0.5) {
        Vec rows(6, 0.0);
        for (std::size_t i = 0; i < 6; ++i)
          for (std::size_t j = 0; j < 8; ++j) rows[i] += p.plan(i, j);
        for (std::size_t i = 0; i < 6; ++i)
          if (i != bad) o.check(rows[bad] < rows[i], fmt("trial %.0f row %.0f", trial, i));
      }
    }
  }
  o.detail += "20 costs";
  return o;
}

// 4
Outcome gradients() {
  Outcome o;
  Timer t;
  std::mt19937_64 rng(104);
  double worst_net = 0.0;
  std::size_t checked_net = 0;
  for (auto [in, hidden, out] : {std::tuple{3u, 5u, 2u}, std::tuple{6u, 8u, 1u}, std::tuple{2u, 4u, 4u}}) {
    FeedForwardNet net(in, hidden, out);
    net.init(rng);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (const char* name : {"b1", "b2", "b3"})
      for (double& v : net.param(name)) v = nd(rng);
    for (const char* name : {"g1", "g2"})
      for (double& v : net.param(name)) v = 1.0 + nd(rng);
    const Mat x = oracle::random_mat(5, in, rng), w = oracle::random_mat(5, out, rng);
    auto loss = [&] {
      const Mat y = net.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * w.data[i];
      return s;
    };
    Tape tape;
    net.forward(x, &tape);
    net.zero_grad();
    net.backward(tape, w);
    const auto g = net.grads();
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double fd = oracle::central_diff(loss, net.params()[k], 1e-5);
      const double rel = oracle::rel_err(fd, g[k], 1e-6);
      worst_net = std::max(worst_net, rel);
      o.check(rel < 1e-4, fmt("net param %.0f rel %.3g", k, rel));
      ++checked_net;
    }
  }

  const ToyWorld w = setup_world(WorldConfig{});
  std::mt19937_64 brng(3);
  const DirectBatch b = sample_direct_batch(w, 2, 2, brng);
  ToyDenoiser d = w.denoiser;
  for (double& p : d.ema.params()) p *= 1.01;
  DirectOptions opt;
  const DirectResult base = direct_loss(w, d, b, opt);
  opt.frozen_plans = &base.plans;
  d.net.zero_grad();
  direct_loss(w, d, b, opt, true);
  const auto g = d.net.grads();
  double worst_e2e = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double fd = oracle::central_diff([&] { return direct_loss(w, d, b, opt).loss; }, d.net.params()[k], 1e-6);
    const double rel = oracle::rel_err(fd, g[k], 1e-6);
    worst_e2e = std::max(worst_e2e, rel);
    o.check(rel < 1e-3, fmt("direct_loss param %.0f fd %.6g an %.6g", k, fd, g[k]));
  }
  o.check(t.seconds() < 60.0, fmt("runtime %.1fs", t.seconds()));
  o.detail += fmt("net worst %.2g over %.0f params; direct_loss worst %.2g over %.0f params", worst_net,
                  static_cast<double>(checked_net), worst_e2e, static_cast<double>(g.size()));
  o.detail += fmt(", %.1fs", t.seconds());
  return o;
}

EmbeddingSet gaussian(Modality mod, std::size_t n, const Vec& mean, const Vec& sd, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  EmbeddingSet s{mod, Mat(n, mean.size()), std::nullopt};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < mean.size(); ++k) s.vectors(i, k) = mean[k] + sd[k] * nd(rng);
  return s;
}

// 5
Outcome monge() {
  Outcome o;
  Timer t;
  NotTrainConfig c;
  c.steps = 4000;
  c.seed = 1;
  {
    std::mt19937_64 rng(11);
    const EmbeddingSet x = gaussian(Modality::text, 2000, {0.0}, {1.0}, rng);
    const EmbeddingSet y = gaussian(Modality::video, 2000, {3.0}, {2.0}, rng);
    const OtMapArtifact a = train_not(x, y, c);
    const Mat h = gaussian(Modality::text, 1000, {0.0}, {1.0}, rng).vectors;
    const Mat m = a.apply(h);
    double mae = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) mae += std::abs(m.data[i] - (3.0 + 2.0 * h.data[i])) / 1000.0;
    const double sp = spearman_pairwise(h, m);
    o.check(mae < 0.15, fmt("1-D MAE %.4f", mae));
    o.check(sp >= 0.9, fmt("1-D spearman %.4f", sp));
    o.detail += fmt("1-D MAE %.4f sp %.4f; ", mae, sp);
  }
  {
    std::mt19937_64 rng(12);
    const EmbeddingSet x = gaussian(Modality::text, 2000, {0.0, 0.0}, {1.0, 1.0}, rng);
    const EmbeddingSet y = gaussian(Modality::video, 2000, {5.0, -5.0}, {1.0, 1.0}, rng);
    const OtMapArtifact a = train_not(x, y, c);
    const Mat h = gaussian(Modality::text, 1000, {0.0, 0.0}, {1.0, 1.0}, rng).vectors;
    const Mat m = a.apply(h);
    double mae = 0.0;
    for (std::size_t i = 0; i < 1000; ++i)
      mae += (std::abs(m(i, 0) - h(i, 0) - 5.0) + std::abs(m(i, 1) - h(i, 1) + 5.0)) / 2000.0;
    const double sp = spearman_pairwise(h, m);
    o.check(mae < 0.25, fmt("2-D MAE %.4f", mae));
    o.check(sp >= 0.9, fmt("2-D spearman %.4f", sp));
    o.detail += fmt("2-D MAE %.4f sp %.4f; ", mae, sp);
  }
  o.check(t.seconds() < 300.0, fmt("runtime %.1fs", t.seconds()));
  o.detail += fmt("%.1fs", t.seconds());
  return o;
}

// 6
Outcome alignment_direction() {
  Outcome o;
  SynthSpec s;
  s.classes = 4;
  s.dim = 2;
  s.per_class = 25;
  s.noise = 1.0;
  s.rotate = false;
  s.seed = 3;
  s.text_offset = {8.0, -8.0};
  s.text_scale = {1.0 / 0.7, 0.7};
  const auto [text, video] = generate(s);
  NotTrainConfig c;
  c.steps = 3000;
  c.seed = 5;
  const OtMapArtifact m = train_not(text, video, c);
  const AlignReport r = align_report(text.vectors, m.apply(text.vectors), video.vectors, 10);
  const double tv = total_variation(r.histogram_pre, r.histogram_post);
  o.check(r.mutual_knn_post > r.mutual_knn_pre, fmt("mutual kNN %.4f -> %.4f", r.mutual_knn_pre, r.mutual_knn_post));
  o.check(tv < 0.15, fmt("histogram TV %.4f", tv));
  o.detail += fmt("mutual kNN %.3f -> %.3f, TV %.4f, spearman %.4f", r.mutual_knn_pre, r.mutual_knn_post, tv, r.spearman);
  return o;
}

// 7
Outcome fusion() {
  Outcome o;
  std::mt19937_64 rng(107);
  double worst_row = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + t % 5, m = 1 + (t / 5) % 9;
    const Mat a = oracle::random_stochastic(n, m, rng), p = oracle::random_mat(n, m, rng, 0.0, 0.3);
    const Mat f = fuse(a, p).attn;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        o.check(f(i, j) >= 0.0, "negative entry");
        s += f(i, j);
      }
      worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
  }
  o.check(worst_row < 1e-12, fmt("row sum off by %.3g", worst_row));

  const double eps = kDefaultFusionEps;
  double worst_tv = 0.0;
  for (std::size_t m : {3u, 8u, 16u}) {
    const Mat a = oracle::random_stochastic(4, m, rng);
    const Mat f = fuse(a, Mat(4, m, 1.0 / static_cast<double>(4 * m)), eps).attn;
    for (std::size_t i = 0; i < 4; ++i) {
      double tv = 0.0;
      for (std::size_t j = 0; j < m; ++j) tv += 0.5 * std::abs(f(i, j) - a(i, j));
      worst_tv = std::max(worst_tv, tv);
      o.check(tv <= static_cast<double>(m) * eps, fmt("neutrality TV %.3g at M %.0f", tv, m));
    }
  }

  Mat a(2, 5, 0.2), p(2, 5);
  p(0, 3) = 1.0;
  p(1, 0) = 1.0;
  const Mat f = fuse(a, p, eps).attn;
  const double on = (1.0 + eps) / ((1.0 + eps) + 4.0 * eps);
  o.check(std::abs(f(0, 3) - on) < 1e-15 && f(0, 3) > 1.0 - 1e-6 && f(1, 0) > 1.0 - 1e-6, "one-hot concentration");
  o.detail += fmt("row-sum err %.2g, neutrality TV %.2g, one-hot mass %.9f", worst_row, worst_tv, f(0, 3));
  return o;
}

// 8
Outcome grpo_identities() {
  Outcome o;
  std::mt19937_64 rng(108);
  for (int t = 0; t < 100; ++t) {
    const Mat r = oracle::random_mat(1, 2 + t % 9, rng, -2.0, 2.0);
    const Vec a = grpo_advantages(r.row(0));
    double m = 0.0, v = 0.0;
    for (double x : a) m += x / a.size();
    for (double x : a) v += (x - m) * (x - m) / a.size();
    o.check(std::abs(m) < 1e-12 && std::abs(std::sqrt(v) - 1.0) < 1e-9, "advantage moments");
  }
  const ToyWorld w = setup_world(WorldConfig{});
  ToyDenoiser d = w.denoiser;
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    GrpoConfig cfg;
    cfg.group = 3 + t;
    const RolloutRecord rec = grpo_rollouts(w, d, {0, 1, 2, 3}, cfg, rng);
    const double l = grpo_loss(rec, d, w.schedule, cfg);
    worst = std::max(worst, std::abs(l));
    o.check(std::abs(l) < 1e-9, fmt("|loss| %.3g at theta = theta_old", std::abs(l)));
  }
  const double hand = clipped_objective(1.5, 1.0, 0.2);
  o.check(hand == -1.2, fmt("clip hand case %.17g", hand));
  o.detail += fmt("max |loss| at theta_old %.2g, clip hand case %.2f", worst, hand);
  return o;
}

// 9 and 10 share the runs.
struct PosttrainRuns {
  PosttrainReport direct, grpo, direct_no_cd;
  double t_direct = 0, t_grpo = 0;
};

PosttrainRuns posttrain_runs() {
  const ToyWorld w = setup_world(WorldConfig{});
  PosttrainRuns r;
  PosttrainConfig c;
  c.seed = 0;
  {
    Timer t;
    r.direct = run_posttrain(w, c);
    r.t_direct = t.seconds();
  }
  c.mode = PosttrainMode::grpo;
  {
    Timer t;
    r.grpo = run_posttrain(w, c);
    r.t_grpo = t.seconds();
  }
  c.mode = PosttrainMode::direct;
  c.cd_weight = 0.0;
  r.direct_no_cd = run_posttrain(w, c);
  return r;
}

Outcome improvement(const PosttrainRuns& r) {
  Outcome o;
  auto gain = [](const PosttrainReport& p) { return (p.final_heldout - p.initial_heldout) / std::abs(p.initial_heldout); };
  const double gd = gain(r.direct), gg = gain(r.grpo);
  o.check(gd >= 0.2, fmt("direct gain %.3f", gd));
  o.check(gg >= 0.2, fmt("grpo gain %.3f", gg));
  o.check(r.t_direct < 600.0 && r.t_grpo < 600.0, "runtime");
  o.detail += fmt("direct %.3f -> %.3f (%+.1f%%), ", r.direct.initial_heldout, r.direct.final_heldout, 100 * gd);
  o.detail += fmt("grpo %.3f -> %.3f (%+.1f%%), ", r.grpo.initial_heldout, r.grpo.final_heldout, 100 * gg);
  o.detail += fmt("%.1fs / %.1fs", r.t_direct, r.t_grpo);
  return o;
}

Outcome reward_hacking(const PosttrainRuns& r) {
  Outcome o;
  o.check(r.direct.final_energy <= r.direct_no_cd.final_energy,
          fmt("energy with CD %.4f > without %.4f", r.direct.final_energy, r.direct_no_cd.final_energy));
  o.detail += fmt("energy distance with CD %.4f, without %.4f (start %.4f)", r.direct.final_energy,
                  r.direct_no_cd.final_energy, r.direct.initial_energy);
  return o;
}

// 11
Outcome cli_goldens() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / ("pisces_acceptance_" + std::to_string(::getpid()));
  const auto res = clicases::run_goldens(dir);
  for (const auto& g : res) o.check(g.ok, g.name + ": " + g.detail);
  std::filesystem::remove_all(dir);
  o.detail += std::to_string(res.size()) + " CLI runs compared";
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s  criterion %2d  %-32s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };
  auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.check(false, std::string("exception: ") + e.what());
      return o;
    }
  };
  report(1, "sinkhorn vs birkhoff", guarded(sinkhorn_vs_birkhoff));
  report(2, "balanced marginals", guarded(balanced_residual));
  report(3, "partial mass", guarded(mass_monotone_selective));
  report(4, "gradient checks", guarded(gradients));
  report(5, "neural OT monge maps", guarded(monge));
  report(6, "alignment direction", guarded(alignment_direction));
  report(7, "fusion", guarded(fusion));
  report(8, "grpo identities", guarded(grpo_identities));
  try {
    const PosttrainRuns runs = posttrain_runs();
    report(9, "post-training improvement", improvement(runs));
    report(10, "cd vs reward hacking", reward_hacking(runs));
  } catch (const std::exception& e) {
    Outcome o;
    o.check(false, std::string("exception: ") + e.what());
    report(9, "post-training improvement", o);
    report(10, "cd vs reward hacking", o);
  }
  report(11, "cli goldens", guarded(cli_goldens));
  std::printf("%d of 11 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
