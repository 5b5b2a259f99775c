// SPDX-License-Identifier: Apache-2.0

#include "scd/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace scd::io {
namespace {

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded decode(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw LoadError("missing file: " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw LoadError("cannot decode " + path.string() + ": " + image.message);

  Decoded out;
  const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB) : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(image.format));
  out.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw LoadError("cannot decode " + path.string() + ": " + msg);
  }
  return out;
}

void encode(const std::filesystem::path& path, int height, int width, int channels, const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  switch (channels) {
    case 1: image.format = PNG_FORMAT_GRAY; break;
    case 2: image.format = PNG_FORMAT_GA; break;
    case 3: image.format = PNG_FORMAT_RGB; break;
    case 4: image.format = PNG_FORMAT_RGBA; break;
    default: throw ShapeError("cannot write a " + std::to_string(channels) + "-channel PNG");
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write " + path.string() + ": " + image.message);
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

} // namespace

Raster read_any(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  Raster out(d.channels, d.height, d.width);
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c)
      for (int k = 0; k < d.channels; ++k)
        out(k, r, c) = d.bytes[(static_cast<std::size_t>(r) * d.width + c) * d.channels + k] / 255.0f;
  return out;
}

Raster read_rgb(const std::filesystem::path& path) {
  Raster any = read_any(path);
  if (any.channels() >= 3) {
    Raster out(3, any.height, any.width);
    out.data = any.data.topRows(3);
    return out;
  }
  Raster out(3, any.height, any.width);
  for (int k = 0; k < 3; ++k) out.data.row(k) = any.data.row(0);
  return out;
}

Plane<float> read_gray(const std::filesystem::path& path) {
  Raster any = read_any(path);
  return any.plane(0);
}

ChangeMask read_mask(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  ChangeMask mask(d.height, d.width);
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) {
      const std::uint8_t v = d.bytes[(static_cast<std::size_t>(r) * d.width + c) * d.channels];
      if (v != 0 && v != 255)
        throw FormatError("mask " + path.string() + " has non-binary value " + std::to_string(v) + " at (" +
                          std::to_string(r) + "," + std::to_string(c) + ")");
      mask(r, c) = v > 127 ? 1 : 0;
    }
  return mask;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  const int ch = image.channels();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(image.pixels()) * ch);
  for (Eigen::Index i = 0; i < image.pixels(); ++i)
    for (int k = 0; k < ch; ++k) bytes[static_cast<std::size_t>(i) * ch + k] = quantize(image.data(k, i));
  encode(path, image.height, image.width, ch, bytes);
}

void write_mask(const std::filesystem::path& path, const ChangeMask& mask) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      bytes[static_cast<std::size_t>(r * mask.cols() + c)] = mask(r, c) ? 255 : 0;
  encode(path, static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), 1, bytes);
}

void write_gray(const std::filesystem::path& path, const Plane<float>& plane) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(plane.size()));
  for (Eigen::Index r = 0; r < plane.rows(); ++r)
    for (Eigen::Index c = 0; c < plane.cols(); ++c)
      bytes[static_cast<std::size_t>(r * plane.cols() + c)] = quantize(plane(r, c));
  encode(path, static_cast<int>(plane.rows()), static_cast<int>(plane.cols()), 1, bytes);
}

} // namespace scd::io
