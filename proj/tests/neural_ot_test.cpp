// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "pisces/metrics.hpp"
#include "pisces/neural_ot.hpp"
#include "support.hpp"

using namespace pisces;

namespace {

FeedForwardNet random_net(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  FeedForwardNet net(in, hidden, out);
  net.init(rng);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (const char* name : {"b1", "s1", "b2", "s2", "b3"})
    for (double& v : net.param(name)) v = nd(rng);
  return net;
}

Mat constant_rows(std::size_t n, const Vec& row) {
  Mat m(n, row.size());
  for (std::size_t i = 0; i < n; ++i) std::copy(row.begin(), row.end(), m.row(i).begin());
  return m;
}

EmbeddingSet gaussian_set(Modality mod, std::size_t n, const Vec& mean, const Vec& sd, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  EmbeddingSet s{mod, Mat(n, mean.size()), std::nullopt};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < mean.size(); ++k) s.vectors(i, k) = mean[k] + sd[k] * nd(rng);
  return s;
}

NotTrainConfig monge_config() {
  NotTrainConfig c;
  c.steps = 4000;
  c.seed = 1;
  return c;
}

}  // namespace

TEST(MapLoss, IdentityOnBatchWithZeroPotential) {
  FeedForwardNet map(2, 4, 2), pot(2, 4, 1);
  map.param("b3")[0] = 0.7;
  map.param("b3")[1] = -1.3;
  // zero hidden weights: T(y) = b3 for every y, so a batch of b3 rows is a fixed point
  EXPECT_EQ(map_loss(map, pot, constant_rows(5, {0.7, -1.3})), 0.0);
}

TEST(MapLoss, FixedOffset) {
  FeedForwardNet map(2, 4, 2), pot(2, 4, 1);
  map.param("b3")[0] = 1.0;
  map.param("b3")[1] = 2.0;
  // T(y) = y + u with u = (1, 2) - (0, 0)
  EXPECT_NEAR(map_loss(map, pot, constant_rows(3, {0.0, 0.0})), 5.0, 1e-15);
}

TEST(MapLoss, LoopOracle) {
  std::mt19937_64 rng(1);
  const FeedForwardNet map = random_net(3, 6, 3, rng), pot = random_net(3, 5, 1, rng);
  const Mat ys = oracle::random_mat(7, 3, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    Mat row(1, 3);
    std::copy(ys.row(i).begin(), ys.row(i).end(), row.data.begin());
    const Mat t = map.forward(row);
    s += oracle::loop_sq_dist(ys.row(i), t.row(0)) - pot.forward(t)(0, 0);
  }
  EXPECT_NEAR(map_loss(map, pot, ys), s / 7.0, 1e-10);
}

TEST(PotentialLoss, Examples) {
  std::mt19937_64 rng(2);
  const FeedForwardNet map = random_net(3, 4, 3, rng);
  const Mat xs = oracle::random_mat(5, 3, rng), ys = oracle::random_mat(6, 3, rng);
  FeedForwardNet zero(3, 4, 1);
  EXPECT_EQ(potential_loss(map, zero, xs, ys), 0.0);
  zero.param("b3")[0] = 4.2;
  EXPECT_NEAR(potential_loss(map, zero, xs, ys), 0.0, 1e-15);

  const FeedForwardNet pot = random_net(3, 5, 1, rng);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    Mat row(1, 3);
    std::copy(ys.row(i).begin(), ys.row(i).end(), row.data.begin());
    a += pot.forward(map.forward(row))(0, 0);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    Mat row(1, 3);
    std::copy(xs.row(i).begin(), xs.row(i).end(), row.data.begin());
    b += pot.forward(row)(0, 0);
  }
  EXPECT_NEAR(potential_loss(map, pot, xs, ys), a / 6.0 - b / 5.0, 1e-10);
}

TEST(LossGradients, BothNetsMatchFiniteDifference) {
  std::mt19937_64 rng(3);
  for (std::size_t d : {2u, 5u, 8u}) {
    FeedForwardNet map = random_net(d, 6, d, rng), pot = random_net(d, 7, 1, rng);
    const Mat ys = oracle::random_mat(6, d, rng), xs = oracle::random_mat(5, d, rng);

    map_loss_backward(map, pot, ys);
    for (std::size_t k = 0; k < map.params().size(); ++k) {
      const double fd = oracle::central_diff([&] { return map_loss(map, pot, ys); }, map.params()[k], 1e-5);
      EXPECT_LT(oracle::rel_err(fd, map.grads()[k], 1e-6), 1e-4) << "map param " << k << " d=" << d;
    }
    potential_loss_backward(map, pot, xs, ys);
    for (std::size_t k = 0; k < pot.params().size(); ++k) {
      const double fd = oracle::central_diff([&] { return potential_loss(map, pot, xs, ys); }, pot.params()[k], 1e-5);
      EXPECT_LT(oracle::rel_err(fd, pot.grads()[k], 1e-6), 1e-4) << "potential param " << k << " d=" << d;
    }
  }
}

TEST(TrainNot, AlreadyAlignedLowersTransportCost) {
  std::mt19937_64 rng(4);
  const EmbeddingSet t = gaussian_set(Modality::text, 400, {0.0, 1.0, -1.0}, {1.0, 0.5, 2.0}, rng);
  EmbeddingSet v = t;
  v.modality = Modality::video;
  NotTrainConfig c;
  c.steps = 0;
  c.seed = 9;
  auto cost = [&](const OtMapArtifact& a) {
    const Mat m = a.apply(t.vectors);
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += oracle::loop_sq_dist(m.row(i), t.vectors.row(i));
    return s / static_cast<double>(m.rows);
  };
  const double before = cost(train_not(t, v, c));
  c.steps = 200;
  const OtMapArtifact trained = train_not(t, v, c);
  EXPECT_EQ(trained.curve.size(), 200u);
  EXPECT_LT(cost(trained), before);
}

TEST(TrainNot, OneDimGaussianMongeMap) {
  std::mt19937_64 rng(11);
  const EmbeddingSet t = gaussian_set(Modality::text, 2000, {0.0}, {1.0}, rng);
  const EmbeddingSet v = gaussian_set(Modality::video, 2000, {3.0}, {2.0}, rng);
  const OtMapArtifact a = train_not(t, v, monge_config());
  const Mat h = gaussian_set(Modality::text, 1000, {0.0}, {1.0}, rng).vectors;
  const Mat o = a.apply(h);
  double mae = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) mae += std::abs(o.data[i] - (3.0 + 2.0 * h.data[i])) / 1000.0;
  EXPECT_LT(mae, 0.15);
  EXPECT_GE(spearman_pairwise(h, o), 0.9);
}

TEST(TrainNot, TwoDimTranslation) {
  std::mt19937_64 rng(12);
  const EmbeddingSet t = gaussian_set(Modality::text, 2000, {0.0, 0.0}, {1.0, 1.0}, rng);
  const EmbeddingSet v = gaussian_set(Modality::video, 2000, {5.0, -5.0}, {1.0, 1.0}, rng);
  const OtMapArtifact a = train_not(t, v, monge_config());
  const Mat h = gaussian_set(Modality::text, 1000, {0.0, 0.0}, {1.0, 1.0}, rng).vectors;
  const Mat o = a.apply(h);
  double mae = 0.0;
  for (std::size_t i = 0; i < 1000; ++i)
    mae += (std::abs(o(i, 0) - h(i, 0) - 5.0) + std::abs(o(i, 1) - h(i, 1) + 5.0)) / 2000.0;
  EXPECT_LT(mae, 0.25);
  EXPECT_GE(spearman_pairwise(h, o), 0.9);
}

TEST(TrainNot, DeterministicBytes) {
  std::mt19937_64 rng(5);
  const EmbeddingSet t = gaussian_set(Modality::text, 100, {0.0, 0.0}, {1.0, 1.0}, rng);
  const EmbeddingSet v = gaussian_set(Modality::video, 100, {1.0, 0.0}, {1.0, 1.0}, rng);
  NotTrainConfig c;
  c.steps = 20;
  c.seed = 3;
  EXPECT_EQ(serialize(train_not(t, v, c)), serialize(train_not(t, v, c)));
}

TEST(TrainNot, EmptySet) {
  EmbeddingSet e{Modality::text, Mat(0, 2), std::nullopt};
  EmbeddingSet v{Modality::video, Mat(3, 2, 1.0), std::nullopt};
  EXPECT_THROW(train_not(e, v, {}), Error);
}

TEST(OtMapFile, RoundTripAndBadMagic) {
  std::mt19937_64 rng(6);
  const EmbeddingSet t = gaussian_set(Modality::text, 50, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, rng);
  NotTrainConfig c;
  c.steps = 5;
  c.hidden = 8;
  const OtMapArtifact a = train_not(t, t, c);
  const std::string bytes = serialize(a);
  EXPECT_EQ(bytes.substr(0, 6), "OTMAP1");
  const OtMapArtifact b = deserialize_otmap(bytes);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(serialize(b), bytes);
  std::string bad = bytes;
  bad[0] = 'X';
  try {
    deserialize_otmap(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bad-magic");
  }
  EXPECT_THROW(deserialize_otmap(bytes.substr(0, bytes.size() / 2)), Error);
}
