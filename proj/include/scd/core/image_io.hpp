// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "scd/core/types.hpp"

namespace scd::io {

/// Reads an 8-bit PNG as a 3-channel raster in [0,1]. Gray inputs are
/// replicated, alpha is dropped.
Raster read_rgb(const std::filesystem::path& path);

/// Reads an 8-bit PNG keeping its channel count (1, 2, 3 or 4).
Raster read_any(const std::filesystem::path& path);

/// Reads a {0,255} single-channel PNG as a binary mask. Any other value
/// is a FormatError.
ChangeMask read_mask(const std::filesystem::path& path);

/// Reads a single-channel PNG as a plane in [0,1].
Plane<float> read_gray(const std::filesystem::path& path);

/// Writes 1, 3 or 4 channel rasters as 8-bit PNG; values are clamped and
/// rounded to the nearest 8-bit level.
void write_png(const std::filesystem::path& path, const Raster& image);

void write_mask(const std::filesystem::path& path, const ChangeMask& mask);

void write_gray(const std::filesystem::path& path, const Plane<float>& plane);

} // namespace scd::io
