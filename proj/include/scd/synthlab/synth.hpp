// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "scd/core/types.hpp"

namespace scd::synth {

using Rng = std::mt19937_64;

/// Foreground sprite with soft alpha; pasted into one branch of a pair to
/// create a labeled change.
struct ObjectCutout {
  Raster rgb;          // 3 x h x w
  Plane<float> alpha;  // h x w

  int height() const { return rgb.height; }
  int width() const { return rgb.width; }
};

/// Soft occluder, 1 = full shadow.
struct ShadowPattern {
  Plane<float> pattern;
};

enum class BranchPolicy { t0_only, t1_only, either };

struct SynthConfig {
  double paste_rate = 1.5;
  BranchPolicy paste_branch_policy = BranchPolicy::either;
  double shadow_probability = 0.5;
  std::pair<double, double> shadow_weight_range{0.3, 0.7};
  double photometric_severity = 0.3;
  int median_kernel = 3;
  double alpha_threshold = 0.5;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError on the first violated range.
  void validate() const;
};

struct Position {
  int row = 0;
  int col = 0;
};

/// Composites `cutout` into the chosen branch at `position` (top-left) and
/// ORs its thresholded alpha support into the mask.
LabeledSample paste_object(const LabeledSample& sample, const ObjectCutout& cutout, Position position, Branch branch,
                           double alpha_threshold = 0.5);

/// out = image * (1 - weight * pattern), clipped to [0,1].
Raster apply_shadow(const Raster& image, const ShadowPattern& pattern, double weight);

/// Shadows one branch of a sample; the mask is returned unchanged.
LabeledSample apply_shadow(const LabeledSample& sample, const ShadowPattern& pattern, double weight, Branch branch);

/// Contrast scale, brightness offset, then median filter; clipped to [0,1].
Raster photometric_augment(const Raster& image, double severity, int kernel, Rng& rng);

/// Per-channel median filter with replicated borders.
Raster median_filter(const Raster& image, int kernel);

ChangeMask label_or(const ChangeMask& mask_added, const ChangeMask& mask_removed);

/// Procedural unchanged pair: one cluttered background rendered twice with
/// independent photometric jitter.
ImagePair generate_scene(Rng& rng, int height, int width);

/// Largest per-pixel |t0 - t1| generate_scene can produce.
inline constexpr float kSceneJitterEnvelope = 0.4f;

/// Number of cutouts pasted by synth_dataset / on-the-fly augmentation for
/// one sample.
int draw_paste_count(double paste_rate, Rng& rng);

/// Pastes `count` random cutouts into both branches at one shared position
/// each, leaving the mask untouched. A placement is kept only when the
/// cutout box holds no changed pixel, so the label stays exact; up to 8
/// positions are tried per cutout before it is skipped.
LabeledSample paste_distractors(const LabeledSample& sample, const std::vector<ObjectCutout>& cutouts, int count,
                                Rng& rng);

/// Runs the full per-sample synthesis recipe (paste, shadow, photometric)
/// on one sample with the given generator.
LabeledSample synthesize_sample(const LabeledSample& base, const std::vector<ObjectCutout>& cutouts,
                                const std::vector<ShadowPattern>& shadows, const SynthConfig& config, Rng& rng);

/// `count` samples; sample i uses seed derive_seed(config.rng_seed, i).
std::vector<LabeledSample> synth_dataset(const std::vector<ImagePair>& backgrounds,
                                         const std::vector<ObjectCutout>& cutouts,
                                         const std::vector<ShadowPattern>& shadows, const SynthConfig& config,
                                         int count);

/// Same as above with labeled backgrounds (existing masks are kept and
/// extended by the paste rule).
std::vector<LabeledSample> synth_dataset(const std::vector<LabeledSample>& backgrounds,
                                         const std::vector<ObjectCutout>& cutouts,
                                         const std::vector<ShadowPattern>& shadows, const SynthConfig& config,
                                         int count);

} // namespace scd::synth
