// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scd/core/tensor.hpp"

namespace scd {

/// Per-pixel binary change label, every element exactly 0 or 1.
using ChangeMask = Plane<std::uint8_t>;

/// Per-pixel change probability, strictly inside (0, 1).
template <typename Scalar>
using ProbabilityMask = Plane<Scalar>;

/// Two co-registered captures of one scene.
struct ImagePair {
  Raster t0;
  Raster t1;
  std::string scene_id;
};

enum class Provenance { real, synthetic };
enum class Split { train, test };

struct LabeledSample {
  ImagePair pair;
  ChangeMask mask;
  Provenance provenance = Provenance::real;
  Split split = Split::train;

  bool has_mask() const { return mask.size() > 0; }
};

enum class Branch { t0, t1 };

std::string_view to_string(Provenance p);
std::string_view to_string(Split s);
Provenance provenance_from_string(std::string_view s);
Split split_from_string(std::string_view s);

/// Throws ShapeError/FormatError if the pair breaks its invariants.
void validate(const ImagePair& pair);

/// Throws if the mask is not strictly binary or does not match the pair.
void validate(const LabeledSample& sample);

bool is_binary(const ChangeMask& mask);

inline ChangeMask zero_mask(const ImagePair& pair) {
  return ChangeMask::Zero(pair.t0.height, pair.t0.width);
}

} // namespace scd
