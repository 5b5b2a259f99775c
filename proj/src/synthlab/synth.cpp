// SPDX-License-Identifier: Apache-2.0

#include "scd/synthlab/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "scd/core/hash.hpp"

namespace scd::synth {
namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void check_same_dims(const ChangeMask& a, const ChangeMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("mask dims differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

inline void sort2(float& a, float& b) {
  const float lo = std::min(a, b);
  b = std::max(a, b);
  a = lo;
}

// Exchange network for the median of nine values.
inline float median9(std::array<float, 9> p) {
  sort2(p[1], p[2]); sort2(p[4], p[5]); sort2(p[7], p[8]);
  sort2(p[0], p[1]); sort2(p[3], p[4]); sort2(p[6], p[7]);
  sort2(p[1], p[2]); sort2(p[4], p[5]); sort2(p[7], p[8]);
  sort2(p[0], p[3]); sort2(p[5], p[8]); sort2(p[4], p[7]);
  sort2(p[3], p[6]); sort2(p[1], p[4]); sort2(p[2], p[5]);
  sort2(p[4], p[7]); sort2(p[4], p[2]); sort2(p[6], p[4]);
  sort2(p[4], p[2]);
  return p[4];
}

Branch pick_branch(BranchPolicy policy, Rng& rng) {
  switch (policy) {
    case BranchPolicy::t0_only: return Branch::t0;
    case BranchPolicy::t1_only: return Branch::t1;
    case BranchPolicy::either: break;
  }
  return uniform_int(rng, 0, 1) == 0 ? Branch::t0 : Branch::t1;
}

Raster& branch_image(LabeledSample& s, Branch b) { return b == Branch::t0 ? s.pair.t0 : s.pair.t1; }

} // namespace

void SynthConfig::validate() const {
  if (!(paste_rate >= 0.0) || !std::isfinite(paste_rate)) throw ConfigError("paste_rate must be >= 0");
  if (!(shadow_probability >= 0.0 && shadow_probability <= 1.0))
    throw ConfigError("shadow_probability must lie in [0,1]");
  const auto [lo, hi] = shadow_weight_range;
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("shadow_weight_range must be a sub-interval of [0,1]");
  if (!(photometric_severity >= 0.0 && photometric_severity <= 1.0))
    throw ConfigError("photometric_severity must lie in [0,1]");
  if (median_kernel < 1 || median_kernel % 2 == 0) throw ConfigError("median_kernel must be odd and >= 1");
  if (!(alpha_threshold > 0.0 && alpha_threshold < 1.0)) throw ConfigError("alpha_threshold must lie in (0,1)");
}

LabeledSample paste_object(const LabeledSample& sample, const ObjectCutout& cutout, Position position, Branch branch,
                           double alpha_threshold) {
  const int h = cutout.height();
  const int w = cutout.width();
  if (cutout.alpha.rows() != h || cutout.alpha.cols() != w || cutout.rgb.channels() != 3)
    throw ShapeError("cutout rgb and alpha dims differ");
  const int H = sample.pair.t0.height;
  const int W = sample.pair.t0.width;
  if (position.row < 0 || position.col < 0 || position.row + h > H || position.col + w > W)
    throw PlacementError("cutout " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                         std::to_string(position.row) + "," + std::to_string(position.col) +
                         ") does not fit a " + std::to_string(H) + "x" + std::to_string(W) + " image");

  LabeledSample out = sample;
  if (!out.has_mask()) out.mask = zero_mask(out.pair);
  Raster& img = branch_image(out, branch);
  for (int k = 0; k < 3; ++k) {
    auto window = img.plane(k).block(position.row, position.col, h, w);
    window = cutout.alpha * cutout.rgb.plane(k) + (1.0f - cutout.alpha) * window;
  }
  auto support = (cutout.alpha > static_cast<float>(alpha_threshold)).cast<std::uint8_t>();
  auto mask_window = out.mask.block(position.row, position.col, h, w);
  mask_window = mask_window.max(support);
  return out;
}

Raster apply_shadow(const Raster& image, const ShadowPattern& shadow, double weight) {
  if (shadow.pattern.rows() != image.height || shadow.pattern.cols() != image.width)
    throw ShapeError("shadow pattern is " + std::to_string(shadow.pattern.rows()) + "x" +
                     std::to_string(shadow.pattern.cols()) + ", image is " + shape_string(image));
  if (!(weight >= 0.0 && weight <= 1.0)) throw ConfigError("shadow weight must lie in [0,1]");
  Raster out = image;
  const Plane<float> factor = 1.0f - static_cast<float>(weight) * shadow.pattern;
  for (int k = 0; k < out.channels(); ++k) out.plane(k) = (out.plane(k) * factor).max(0.0f).min(1.0f);
  return out;
}

LabeledSample apply_shadow(const LabeledSample& sample, const ShadowPattern& pattern, double weight, Branch branch) {
  LabeledSample out = sample;
  branch_image(out, branch) = apply_shadow(branch_image(out, branch), pattern, weight);
  return out;
}

Raster median_filter(const Raster& image, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("median kernel must be odd and >= 1, got " + std::to_string(kernel));
  if (kernel == 1) return image;
  const int H = image.height;
  const int W = image.width;
  const int r = kernel / 2;
  Raster out(image.channels(), H, W);
  std::vector<float> window(static_cast<std::size_t>(kernel) * kernel);
  for (int k = 0; k < image.channels(); ++k) {
    const auto src = image.plane(k);
    auto dst = out.plane(k);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (kernel == 3) {
          std::array<float, 9> p;
          int n = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              p[n++] = src(std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1));
          dst(y, x) = median9(p);
          continue;
        }
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            window[n++] = src(std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1));
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        dst(y, x) = *mid;
      }
    }
  }
  return out;
}

Raster photometric_augment(const Raster& image, double severity, int kernel, Rng& rng) {
  if (!(severity >= 0.0 && severity <= 1.0)) throw ConfigError("severity must lie in [0,1]");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("median kernel must be odd and >= 1, got " + std::to_string(kernel));
  const double contrast = severity > 0.0 ? uniform(rng, 1.0 - severity, 1.0 + severity) : 1.0;
  const double brightness = severity > 0.0 ? uniform(rng, -severity, severity) : 0.0;
  Raster out = image;
  if (severity > 0.0)
    out.data = (out.data.array() * static_cast<float>(contrast) + static_cast<float>(brightness)).matrix();
  out = median_filter(out, kernel);
  out.data = out.data.cwiseMax(0.0f).cwiseMin(1.0f);
  return out;
}

ChangeMask label_or(const ChangeMask& mask_added, const ChangeMask& mask_removed) {
  check_same_dims(mask_added, mask_removed);
  return (mask_added != 0 || mask_removed != 0).cast<std::uint8_t>();
}

int draw_paste_count(double paste_rate, Rng& rng) {
  if (paste_rate <= 0.0) return 0;
  return std::poisson_distribution<int>(paste_rate)(rng);
}

LabeledSample paste_distractors(const LabeledSample& sample, const std::vector<ObjectCutout>& cutouts, int count,
                                Rng& rng) {
  LabeledSample s = sample;
  if (count <= 0 || cutouts.empty()) return s;
  if (!s.has_mask()) s.mask = zero_mask(s.pair);
  const int H = s.pair.t0.height;
  const int W = s.pair.t0.width;
  for (int j = 0; j < count; ++j) {
    const ObjectCutout& cutout = cutouts[static_cast<std::size_t>(uniform_int(rng, 0, int(cutouts.size()) - 1))];
    if (cutout.height() > H || cutout.width() > W) throw ConfigError("cutout larger than the background image");
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Position pos{uniform_int(rng, 0, H - cutout.height()), uniform_int(rng, 0, W - cutout.width())};
      if ((s.mask.block(pos.row, pos.col, cutout.height(), cutout.width()) != 0).any()) continue;
      for (Raster* img : {&s.pair.t0, &s.pair.t1})
        for (int k = 0; k < 3; ++k) {
          auto window = img->plane(k).block(pos.row, pos.col, cutout.height(), cutout.width());
          window = cutout.alpha * cutout.rgb.plane(k) + (1.0f - cutout.alpha) * window;
        }
      break;
    }
  }
  return s;
}

LabeledSample synthesize_sample(const LabeledSample& base, const std::vector<ObjectCutout>& cutouts,
                                const std::vector<ShadowPattern>& shadows, const SynthConfig& config, Rng& rng) {
  LabeledSample s = base;
  s.provenance = Provenance::synthetic;
  if (!s.has_mask()) s.mask = zero_mask(s.pair);

  const int H = s.pair.t0.height;
  const int W = s.pair.t0.width;
  const int pastes = draw_paste_count(config.paste_rate, rng);
  for (int j = 0; j < pastes; ++j) {
    const ObjectCutout& cutout = cutouts[static_cast<std::size_t>(uniform_int(rng, 0, int(cutouts.size()) - 1))];
    if (cutout.height() > H || cutout.width() > W) throw ConfigError("cutout larger than the background image");
    const Branch branch = pick_branch(config.paste_branch_policy, rng);
    const Position pos{uniform_int(rng, 0, H - cutout.height()), uniform_int(rng, 0, W - cutout.width())};
    s = paste_object(s, cutout, pos, branch, config.alpha_threshold);
  }

  for (Branch b : {Branch::t0, Branch::t1}) {
    if (config.shadow_probability <= 0.0 || shadows.empty()) continue;
    if (uniform(rng, 0.0, 1.0) >= config.shadow_probability) continue;
    const ShadowPattern& pattern = shadows[static_cast<std::size_t>(uniform_int(rng, 0, int(shadows.size()) - 1))];
    const auto [lo, hi] = config.shadow_weight_range;
    const double weight = hi > lo ? uniform(rng, lo, hi) : lo;
    branch_image(s, b) = apply_shadow(branch_image(s, b), pattern, weight);
  }

  for (Branch b : {Branch::t0, Branch::t1})
    branch_image(s, b) = photometric_augment(branch_image(s, b), config.photometric_severity, config.median_kernel, rng);
  return s;
}

std::vector<LabeledSample> synth_dataset(const std::vector<LabeledSample>& backgrounds,
                                         const std::vector<ObjectCutout>& cutouts,
                                         const std::vector<ShadowPattern>& shadows, const SynthConfig& config,
                                         int count) {
  config.validate();
  if (count < 0) throw ConfigError("count must be >= 0");
  if (backgrounds.empty()) throw ConfigError("synthesis needs at least one background pair");
  if (config.paste_rate > 0.0 && cutouts.empty()) throw ConfigError("paste_rate > 0 needs at least one cutout");
  if (config.shadow_probability > 0.0 && shadows.empty())
    throw ConfigError("shadow_probability > 0 needs at least one shadow pattern");

  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(config.rng_seed, static_cast<std::uint64_t>(i)));
    const auto& bg = backgrounds[static_cast<std::size_t>(uniform_int(rng, 0, int(backgrounds.size()) - 1))];
    LabeledSample s = synthesize_sample(bg, cutouts, shadows, config, rng);
    char id[32];
    std::snprintf(id, sizeof id, "syn_%06d", i);
    s.pair.scene_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledSample> synth_dataset(const std::vector<ImagePair>& backgrounds,
                                         const std::vector<ObjectCutout>& cutouts,
                                         const std::vector<ShadowPattern>& shadows, const SynthConfig& config,
                                         int count) {
  std::vector<LabeledSample> labeled;
  labeled.reserve(backgrounds.size());
  for (const auto& pair : backgrounds) {
    LabeledSample s;
    s.pair = pair;
    s.mask = zero_mask(pair);
    labeled.push_back(std::move(s));
  }
  return synth_dataset(labeled, cutouts, shadows, config, count);
}

} // namespace scd::synth
