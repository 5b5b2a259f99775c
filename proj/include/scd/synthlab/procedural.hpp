// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "scd/synthlab/synth.hpp"

namespace scd::synth {

/// Random compact object (ellipse, box or polygon) with a textured fill and
/// an anti-aliased alpha edge. Side lengths fall in [min_size, max_size].
ObjectCutout generate_cutout(Rng& rng, int min_size, int max_size);

/// Soft shadow made of a few blurred blobs and bands covering part of the frame.
ShadowPattern generate_shadow(Rng& rng, int height, int width);

/// Banks generated from a seed; item i depends only on (seed, i).
std::vector<ObjectCutout> cutout_bank(std::uint64_t seed, int count, int min_size, int max_size);
std::vector<ShadowPattern> shadow_bank(std::uint64_t seed, int count, int height, int width);
std::vector<ImagePair> scene_bank(std::uint64_t seed, int count, int height, int width);

/// Loads cutouts from a directory of 4-channel PNGs (alpha = 4th channel),
/// or rgb PNGs with a sibling `<stem>_alpha.png`.
std::vector<ObjectCutout> load_cutouts(const std::filesystem::path& dir);

/// Loads every single-channel PNG in a directory as a shadow pattern.
std::vector<ShadowPattern> load_shadows(const std::filesystem::path& dir);

} // namespace scd::synth
