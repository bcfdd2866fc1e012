// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small tour: partial OT on a toy cost, then a neural OT map between two
// synthetic embedding sets and the alignment report before/after.

#include <cstdio>

#include "pisces/pisces.hpp"

int main() {
  using namespace pisces;

  const Mat cost = Mat::from_rows({{0.0, 1.0, 0.9}, {1.0, 0.0, 0.8}, {0.7, 0.9, 1.0}});
  PartialOTConfig ot;
  ot.mass = 0.7;
  const TransportPlan p = solve_partial_ot(cost, ot);
  std::printf("partial OT: mass %.4f, iters %d, cost %.4f\n", p.transported_mass, p.iters_used,
              plan_cost(p.plan, cost));

  SynthSpec spec;
  spec.dim = 2;
  spec.per_class = 25;
  spec.rotate = false;
  spec.text_offset = {8.0, -8.0};
  const auto [text, video] = generate(spec);

  NotTrainConfig nc;
  nc.steps = 500;
  const OtMapArtifact map = train_not(text, video, nc);
  const AlignReport r = align_report(text.vectors, map.apply(text.vectors), video.vectors, 10);
  std::printf("mutual kNN %.3f -> %.3f, spearman %.3f\n", r.mutual_knn_pre, r.mutual_knn_post, r.spearman);
  return 0;
}
