// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

#include "scd/core/types.hpp"

namespace scd::eval {

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Inclusive pixel bounds.
struct BoundingBox {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;
};

/// Connected set of foreground pixels, in row-major scan order.
struct Region {
  std::vector<Pixel> pixels;
  BoundingBox bbox;

  int area() const { return static_cast<int>(pixels.size()); }
};

enum class Connectivity { four = 4, eight = 8 };
enum class MatchMode { iou_threshold, any_overlap };

std::string_view to_string(MatchMode m);
MatchMode match_mode_from_string(std::string_view s);
Connectivity connectivity_from_int(int n);

struct EvalConfig {
  double binarize_threshold = 0.5;
  Connectivity connectivity = Connectivity::eight;
  int min_area = 0;
  MatchMode match_mode = MatchMode::iou_threshold;
  double iou_tau = 0.5;
  /// Average each prediction with the one for the swapped pair (t1, t0).
  bool symmetric = false;

  void validate() const;

  /// 0.05% of the image area, rounded up.
  static int production_min_area(int height, int width);
};

/// 1 where prob >= threshold.
template <typename Derived>
ChangeMask binarize(const Eigen::ArrayBase<Derived>& prob, double threshold) {
  using Scalar = typename Derived::Scalar;
  return (prob >= static_cast<Scalar>(threshold)).template cast<std::uint8_t>();
}

/// Maximal connected foreground regions ordered by their first pixel in a
/// row-major scan.
std::vector<Region> connected_components(const ChangeMask& mask, Connectivity connectivity);

/// Regions with area >= min_area, order preserved.
std::vector<Region> filter_min_area(std::vector<Region> regions, int min_area);

/// Rasterizes regions into a mask of the given size.
ChangeMask regions_to_mask(const std::vector<Region>& regions, int height, int width);

struct Match {
  int pred = 0;
  int gt = 0;
  double iou = 0.0;
};

struct RegionMatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<Match> matches;
};

/// Pairwise intersection counts: entry (p, g) = |pred[p] ∩ gt[g]|.
Eigen::MatrixXi intersection_counts(const std::vector<Region>& pred, const std::vector<Region>& gt);

/// Greedy one-to-one matching in descending IoU order (ties by pred, then
/// gt index). A pair is accepted when both regions are still free and it
/// passes the configured rule: IoU >= tau, or any shared pixel.
RegionMatchResult match_regions(const std::vector<Region>& pred, const std::vector<Region>& gt,
                                const EvalConfig& config);

struct Prf1 {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

/// Precision = 1 when nothing was predicted, recall = 1 when nothing was
/// there to find; F1 = 0 when both are 0.
Prf1 prf1(long tp, long fp, long fn);

} // namespace scd::eval
