// SPDX-License-Identifier: Apache-2.0

#include "scd/synthlab/procedural.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "scd/core/hash.hpp"
#include "scd/core/image_io.hpp"

namespace fs = std::filesystem;

namespace scd::synth {
namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Eigen::Vector3f random_color(Rng& rng, double lo, double hi) {
  return Eigen::Vector3f(float(uniform(rng, lo, hi)), float(uniform(rng, lo, hi)), float(uniform(rng, lo, hi)));
}

using Inside = std::function<bool(double y, double x)>;

// Shape membership as a function of coordinates normalized to [-1, 1].
Inside random_shape(Rng& rng) {
  switch (uniform_int(rng, 0, 2)) {
    case 0:
      return [](double y, double x) { return x * x + y * y <= 1.0; };
    case 1: {
      const double round = uniform(rng, 0.0, 0.5);
      return [round](double y, double x) {
        const double qx = std::max(std::abs(x) - (1.0 - round), 0.0);
        const double qy = std::max(std::abs(y) - (1.0 - round), 0.0);
        return qx * qx + qy * qy <= round * round;
      };
    }
    default: {
      const int n = uniform_int(rng, 5, 8);
      std::vector<double> radius(static_cast<std::size_t>(n));
      for (auto& r : radius) r = uniform(rng, 0.6, 1.0);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      return [radius, phase, n](double y, double x) {
        double angle = std::atan2(y, x) - phase;
        angle = std::fmod(angle + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
        const double seg = 2.0 * std::numbers::pi / n;
        const int i = std::min(static_cast<int>(angle / seg), n - 1);
        const double t = (angle - i * seg) / seg;
        const double r = (1.0 - t) * radius[static_cast<std::size_t>(i)] + t * radius[static_cast<std::size_t>((i + 1) % n)];
        return std::hypot(x, y) <= r;
      };
    }
  }
}

// Fractional coverage with 4x4 supersampling.
Plane<float> rasterize(const Inside& inside, int h, int w) {
  Plane<float> alpha(h, w);
  constexpr int kSub = 4;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          const double y = ((r + (sy + 0.5) / kSub) / h) * 2.0 - 1.0;
          const double x = ((c + (sx + 0.5) / kSub) / w) * 2.0 - 1.0;
          hits += inside(y, x) ? 1 : 0;
        }
      alpha(r, c) = static_cast<float>(hits) / (kSub * kSub);
    }
  return alpha;
}

void box_blur(Plane<float>& p, int radius) {
  if (radius <= 0) return;
  const int H = static_cast<int>(p.rows());
  const int W = static_cast<int>(p.cols());
  Plane<float> tmp(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float s = 0;
      for (int d = -radius; d <= radius; ++d) s += p(y, std::clamp(x + d, 0, W - 1));
      tmp(y, x) = s / float(2 * radius + 1);
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      float s = 0;
      for (int d = -radius; d <= radius; ++d) s += tmp(std::clamp(y + d, 0, H - 1), x);
      p(y, x) = s / float(2 * radius + 1);
    }
}

} // namespace

ImagePair generate_scene(Rng& rng, int height, int width) {
  if (height < 32 || width < 32) throw ConfigError("generate_scene needs H, W >= 32");
  Raster base(3, height, width);

  const Eigen::Vector3f c1 = random_color(rng, 0.15, 0.85);
  const Eigen::Vector3f c2 = random_color(rng, 0.15, 0.85);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double span = std::abs(ct) * (width - 1) + std::abs(st) * (height - 1) + 1e-9;
  const double offset = std::min(0.0, ct * (width - 1)) + std::min(0.0, st * (height - 1));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float t = static_cast<float>((ct * x + st * y - offset) / span);
      for (int k = 0; k < 3; ++k) base(k, y, x) = c1[k] + (c2[k] - c1[k]) * t;
    }

  // Clutter: static shapes that appear identically in both captures.
  const int clutter = uniform_int(rng, 6, 14);
  const int max_side = std::max(8, std::min(height, width) / 3);
  for (int i = 0; i < clutter; ++i) {
    const int h = uniform_int(rng, 6, max_side);
    const int w = uniform_int(rng, 6, max_side);
    const int top = uniform_int(rng, -h / 2, height - h / 2);
    const int left = uniform_int(rng, -w / 2, width - w / 2);
    const Eigen::Vector3f color = random_color(rng, 0.05, 0.95);
    const Plane<float> alpha = rasterize(random_shape(rng), h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int y = top + r, x = left + c;
        if (y < 0 || x < 0 || y >= height || x >= width) continue;
        for (int k = 0; k < 3; ++k) base(k, y, x) = alpha(r, c) * color[k] + (1.0f - alpha(r, c)) * base(k, y, x);
      }
  }

  std::uniform_real_distribution<float> grain(-0.03f, 0.03f);
  for (Eigen::Index i = 0; i < base.pixels(); ++i) {
    const float g = grain(rng);
    for (int k = 0; k < 3; ++k) base.data(k, i) += g;
  }
  base.data = base.data.cwiseMax(0.0f).cwiseMin(1.0f);

  ImagePair pair;
  pair.t0 = photometric_augment(base, 0.1, 1, rng);
  pair.t1 = photometric_augment(base, 0.1, 1, rng);
  return pair;
}

ObjectCutout generate_cutout(Rng& rng, int min_size, int max_size) {
  if (min_size < 2 || max_size < min_size) throw ConfigError("cutout size range is invalid");
  const int h = uniform_int(rng, min_size, max_size);
  const int w = uniform_int(rng, min_size, max_size);
  ObjectCutout cutout;
  cutout.alpha = rasterize(random_shape(rng), h, w);
  cutout.rgb = Raster(3, h, w);

  const Eigen::Vector3f a = random_color(rng, 0.0, 1.0);
  const Eigen::Vector3f b = random_color(rng, 0.0, 1.0);
  const double period = uniform(rng, 3.0, 10.0);
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  const double mix = uniform(rng, 0.0, 0.6);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double phase = (c * std::cos(angle) + r * std::sin(angle)) / period;
      const float t = static_cast<float>(mix * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * phase)));
      const float shade = 1.0f - 0.25f * static_cast<float>(r) / float(h);
      for (int k = 0; k < 3; ++k) cutout.rgb(k, r, c) = std::clamp(((1 - t) * a[k] + t * b[k]) * shade, 0.0f, 1.0f);
    }
  return cutout;
}

ShadowPattern generate_shadow(Rng& rng, int height, int width) {
  Plane<float> p = Plane<float>::Zero(height, width);
  const int pieces = uniform_int(rng, 1, 3);
  for (int i = 0; i < pieces; ++i) {
    if (uniform_int(rng, 0, 1) == 0) {
      // Half-plane band, like a cast edge across the floor.
      const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double cy = uniform(rng, 0.0, height), cx = uniform(rng, 0.0, width);
      const double thickness = uniform(rng, 0.15, 0.5) * std::min(height, width);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double d = (x - cx) * std::cos(theta) + (y - cy) * std::sin(theta);
          if (d >= 0.0 && d <= thickness) p(y, x) = 1.0f;
        }
    } else {
      const int h = uniform_int(rng, height / 4, height);
      const int w = uniform_int(rng, width / 4, width);
      const int top = uniform_int(rng, -h / 3, height - 2 * h / 3);
      const int left = uniform_int(rng, -w / 3, width - 2 * w / 3);
      const Plane<float> blob = rasterize(random_shape(rng), h, w);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const int y = top + r, x = left + c;
          if (y >= 0 && x >= 0 && y < height && x < width) p(y, x) = std::max(p(y, x), blob(r, c));
        }
    }
  }
  const int blur = uniform_int(rng, 2, std::max(2, std::min(height, width) / 16));
  box_blur(p, blur);
  box_blur(p, blur);
  return ShadowPattern{p.max(0.0f).min(1.0f)};
}

std::vector<ObjectCutout> cutout_bank(std::uint64_t seed, int count, int min_size, int max_size) {
  std::vector<ObjectCutout> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(generate_cutout(rng, min_size, max_size));
  }
  return out;
}

std::vector<ShadowPattern> shadow_bank(std::uint64_t seed, int count, int height, int width) {
  std::vector<ShadowPattern> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(generate_shadow(rng, height, width));
  }
  return out;
}

std::vector<ImagePair> scene_bank(std::uint64_t seed, int count, int height, int width) {
  std::vector<ImagePair> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    ImagePair pair = generate_scene(rng, height, width);
    pair.scene_id = "scene_" + std::to_string(i);
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

} // namespace

std::vector<ObjectCutout> load_cutouts(const fs::path& dir) {
  std::vector<ObjectCutout> out;
  for (const auto& file : sorted_pngs(dir)) {
    const std::string stem = file.stem().string();
    if (stem.ends_with("_alpha")) continue;
    const Raster any = io::read_any(file);
    ObjectCutout cutout;
    if (any.channels() == 4) {
      cutout.rgb = Raster(3, any.height, any.width);
      cutout.rgb.data = any.data.topRows(3);
      cutout.alpha = any.plane(3);
    } else {
      const fs::path alpha = file.parent_path() / (stem + "_alpha.png");
      if (!fs::exists(alpha)) throw LoadError("cutout " + file.string() + " has no alpha channel or " + alpha.string());
      cutout.rgb = io::read_rgb(file);
      cutout.alpha = io::read_gray(alpha);
      if (cutout.alpha.rows() != cutout.rgb.height || cutout.alpha.cols() != cutout.rgb.width)
        throw ShapeError("cutout " + file.string() + ": rgb and alpha dims differ");
    }
    out.push_back(std::move(cutout));
  }
  return out;
}

std::vector<ShadowPattern> load_shadows(const fs::path& dir) {
  std::vector<ShadowPattern> out;
  for (const auto& file : sorted_pngs(dir)) out.push_back(ShadowPattern{io::read_gray(file)});
  return out;
}

} // namespace scd::synth
