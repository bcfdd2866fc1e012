// Copyright 2026 The pisces-ot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pisces/numerics.hpp"

namespace pisces {

enum class Modality : std::uint8_t { text = 0, video = 1 };

inline const char* to_string(Modality m) { return m == Modality::text ? "text" : "video"; }

inline Modality modality_from_string(const std::string& s) {
  if (s == "text") return Modality::text;
  if (s == "video") return Modality::video;
  throw Error(ErrorKind::data, "bad-modality", "expected 'text' or 'video', got '" + s + "'");
}

struct EmbeddingSet {
  Modality modality = Modality::text;
  Mat vectors;
  std::optional<std::vector<std::uint32_t>> labels;

  std::size_t size() const { return vectors.rows; }
  std::size_t dim() const { return vectors.cols; }

  void validate() const {
    require(vectors.rows >= 1, ErrorKind::data, "empty-set", "embedding set has no rows");
    require(vectors.cols >= 1, ErrorKind::data, "empty-set", "embedding set has zero dim");
    require(all_finite(vectors.data), ErrorKind::numeric, "non-finite", "embedding set has non-finite entries");
    if (labels)
      require(labels->size() == vectors.rows, ErrorKind::data, "shape-mismatch", "label count != row count");
  }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

}  // namespace pisces
