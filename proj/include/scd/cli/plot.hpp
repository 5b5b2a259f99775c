// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scd/evalkit/evaluate.hpp"

namespace scd::cli {

struct LabeledCurve {
  std::string label;
  std::vector<eval::PrPoint> points;
};

/// Static SVG with recall on x, precision on y, one polyline plus markers
/// per curve (markers only for single-point curves) and a legend.
void write_pr_plot_svg(const std::vector<LabeledCurve>& curves, const std::filesystem::path& path);

} // namespace scd::cli
