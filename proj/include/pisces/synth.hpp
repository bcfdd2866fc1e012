// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic text/video embedding populations that share cluster structure but
// live in disjoint regions of space, plus the OTEMB1 embedding file format.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pisces/embedding.hpp"
#include "pisces/io.hpp"

namespace pisces {

struct SynthSpec {
  std::size_t classes = 4;
  std::size_t dim = 8;
  std::size_t per_class = 50;
  double center_spread = 3.0;  // std of the class centres
  double noise = 0.5;          // within-cluster std
  Vec text_offset;             // empty means no translation
  bool rotate = true;
  std::uint64_t rotation_seed = 1;
  Vec text_scale;  // per-axis scale applied before the rotation; empty means 1
  std::uint64_t seed = 0;

  void validate() const {
    require(classes >= 2, ErrorKind::usage, "invalid-spec", "classes must be >= 2");
    require(dim >= 1 && per_class >= 1, ErrorKind::usage, "invalid-spec", "dim and per_class must be >= 1");
    require(noise > 0.0, ErrorKind::usage, "invalid-spec", "noise must be > 0");
    require(text_offset.empty() || text_offset.size() == dim, ErrorKind::usage, "invalid-spec",
            "text_offset must have `dim` entries");
    require(text_scale.empty() || text_scale.size() == dim, ErrorKind::usage, "invalid-spec",
            "text_scale must have `dim` entries");
  }
};

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"classes", s.classes},   {"dim", s.dim},     {"per_class", s.per_class}, {"center_spread", s.center_spread},
          {"noise", s.noise},       {"text_offset", s.text_offset}, {"rotate", s.rotate},
          {"rotation_seed", s.rotation_seed}, {"text_scale", s.text_scale}, {"seed", s.seed}};
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.classes = j.value("classes", s.classes);
    s.dim = j.value("dim", s.dim);
    s.per_class = j.value("per_class", s.per_class);
    s.center_spread = j.value("center_spread", s.center_spread);
    s.noise = j.value("noise", s.noise);
    s.text_offset = j.value("text_offset", s.text_offset);
    s.rotate = j.value("rotate", s.rotate);
    s.rotation_seed = j.value("rotation_seed", s.rotation_seed);
    s.text_scale = j.value("text_scale", s.text_scale);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::usage, "invalid-spec", e.what());
  }
  return s;
}

// Haar-ish random orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
inline Mat random_orthogonal(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat q(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    while (true) {
      for (double& x : q.row(i)) x = nd(rng);
      for (std::size_t p = 0; p < i; ++p) {
        const double d = dot(q.row(i), q.row(p));
        for (std::size_t k = 0; k < dim; ++k) q(i, k) -= d * q(p, k);
      }
      const double n = norm(q.row(i));
      if (n > 1e-8) {
        for (double& x : q.row(i)) x /= n;
        break;
      }
    }
  }
  return q;
}

inline std::pair<EmbeddingSet, EmbeddingSet> generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd;
  const std::size_t n = spec.classes * spec.per_class, d = spec.dim;

  Mat centers(spec.classes, d);
  for (double& x : centers.data) x = spec.center_spread * nd(rng);

  EmbeddingSet video{Modality::video, Mat(n, d), std::vector<std::uint32_t>(n)};
  for (std::size_t c = 0, r = 0; c < spec.classes; ++c)
    for (std::size_t p = 0; p < spec.per_class; ++p, ++r) {
      for (std::size_t k = 0; k < d; ++k) video.vectors(r, k) = centers(c, k) + spec.noise * nd(rng);
      (*video.labels)[r] = static_cast<std::uint32_t>(c);
    }

  const Mat q = spec.rotate ? random_orthogonal(d, spec.rotation_seed) : Mat();
  EmbeddingSet text{Modality::text, Mat(n, d), video.labels};
  Vec scaled(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k)
      scaled[k] = video.vectors(r, k) * (spec.text_scale.empty() ? 1.0 : spec.text_scale[k]);
    for (std::size_t k = 0; k < d; ++k) {
      double v = spec.rotate ? dot(q.row(k), scaled) : scaled[k];
      text.vectors(r, k) = v + (spec.text_offset.empty() ? 0.0 : spec.text_offset[k]);
    }
  }
  return {std::move(text), std::move(video)};
}

// ---- OTEMB1 ---------------------------------------------------------------
//
//   "OTEMB1" | u8 modality | u32 count | u32 dim | f64[count * dim]
//   | optional u32[count] labels (present iff bytes remain)

inline std::string serialize(const EmbeddingSet& set) {
  set.validate();
  io::ByteWriter w;
  w.raw("OTEMB1");
  w.u8(static_cast<std::uint8_t>(set.modality));
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.f64s(set.vectors.data);
  if (set.labels)
    for (std::uint32_t l : *set.labels) w.u32(l);
  return w.bytes();
}

inline EmbeddingSet deserialize_emb(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  if (r.remaining() < 6 || r.raw(6) != "OTEMB1") throw Error(ErrorKind::data, "bad-magic", "not an OTEMB1 file");
  const std::uint8_t mod = r.u8();
  require(mod <= 1, ErrorKind::data, "bad-modality", "modality byte must be 0 or 1");
  const std::uint64_t count = r.u32(), dim = r.u32();
  require(count >= 1, ErrorKind::data, "empty-set", "file declares zero rows");
  require(dim >= 1, ErrorKind::data, "empty-set", "file declares zero dim");
  require(count <= UINT64_MAX / dim / 8, ErrorKind::data, "dim-overflow", "count*dim overflows");
  r.need_items(count * dim, 8);
  EmbeddingSet set{static_cast<Modality>(mod), Mat(count, dim), std::nullopt};
  set.vectors.data = r.f64s(count * dim);
  if (r.remaining() > 0) {
    require(r.remaining() == 4 * count, ErrorKind::data, "truncated", "label block size does not match row count");
    std::vector<std::uint32_t> labels(count);
    for (auto& l : labels) l = r.u32();
    set.labels = std::move(labels);
  }
  return set;
}

inline void write_emb(const EmbeddingSet& set, const std::string& path) { io::write_file(path, serialize(set)); }
inline EmbeddingSet read_emb(const std::string& path) { return deserialize_emb(io::read_file(path)); }

// Array of {"modality": "text"|"video", "vector": [...], "label": n?}. All
// rows must share modality and dim.
inline EmbeddingSet emb_from_json(const nlohmann::json& j) {
  require(j.is_array() && !j.empty(), ErrorKind::data, "empty-set", "expected a non-empty JSON array");
  EmbeddingSet set;
  try {
    set.modality = modality_from_string(j.at(0).at("modality").get<std::string>());
    const std::size_t dim = j.at(0).at("vector").size();
    set.vectors = Mat(j.size(), dim);
    const bool labelled = j.at(0).contains("label");
    if (labelled) set.labels.emplace(j.size());
    for (std::size_t r = 0; r < j.size(); ++r) {
      const auto& e = j.at(r);
      require(modality_from_string(e.at("modality").get<std::string>()) == set.modality, ErrorKind::data,
              "mixed-modality", "all rows must share one modality");
      const auto v = e.at("vector").get<std::vector<double>>();
      require(v.size() == dim, ErrorKind::data, "shape-mismatch", "row " + std::to_string(r) + " has wrong dim");
      std::copy(v.begin(), v.end(), set.vectors.row(r).begin());
      require(e.contains("label") == labelled, ErrorKind::data, "shape-mismatch", "labels must be all or none");
      if (labelled) (*set.labels)[r] = e.at("label").get<std::uint32_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, "bad-json", e.what());
  }
  set.validate();
  return set;
}

}  // namespace pisces
