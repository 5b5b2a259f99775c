// SPDX-License-Identifier: Apache-2.0

#include "scd/core/types.hpp"

namespace scd {

std::string_view to_string(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Provenance provenance_from_string(std::string_view s) {
  if (s == "real") return Provenance::real;
  if (s == "synthetic") return Provenance::synthetic;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

void validate(const ImagePair& pair) {
  if (!pair.t0.same_shape(pair.t1))
    throw ShapeError("image pair '" + pair.scene_id + "': t0 is " + shape_string(pair.t0) + " but t1 is " +
                     shape_string(pair.t1));
  for (const Raster* r : {&pair.t0, &pair.t1}) {
    if (!r->data.allFinite() || (r->data.array() < 0.0f).any() || (r->data.array() > 1.0f).any())
      throw FormatError("image pair '" + pair.scene_id + "': intensities outside [0,1]");
  }
}

bool is_binary(const ChangeMask& mask) { return (mask <= 1).all(); }

void validate(const LabeledSample& sample) {
  validate(sample.pair);
  if (!sample.has_mask()) return;
  if (sample.mask.rows() != sample.pair.t0.height || sample.mask.cols() != sample.pair.t0.width)
    throw ShapeError("sample '" + sample.pair.scene_id + "': mask dims do not match image dims");
  if (!is_binary(sample.mask)) throw FormatError("sample '" + sample.pair.scene_id + "': mask is not binary");
}

} // namespace scd
