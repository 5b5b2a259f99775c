// SPDX-License-Identifier: Apache-2.0

#include "scd/evalkit/regions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scd::eval {

std::string_view to_string(MatchMode m) { return m == MatchMode::iou_threshold ? "iou_threshold" : "any_overlap"; }

MatchMode match_mode_from_string(std::string_view s) {
  if (s == "iou_threshold" || s == "iou") return MatchMode::iou_threshold;
  if (s == "any_overlap" || s == "overlap") return MatchMode::any_overlap;
  throw ConfigError("unknown match mode '" + std::string(s) + "' (expected iou_threshold or any_overlap)");
}

Connectivity connectivity_from_int(int n) {
  if (n == 4) return Connectivity::four;
  if (n == 8) return Connectivity::eight;
  throw ConfigError("connectivity must be 4 or 8, got " + std::to_string(n));
}

void EvalConfig::validate() const {
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) throw ConfigError("binarize_threshold must lie in (0,1)");
  if (min_area < 0) throw ConfigError("min_area must be >= 0");
  if (!(iou_tau > 0.0 && iou_tau <= 1.0)) throw ConfigError("iou_tau must lie in (0,1]");
}

int EvalConfig::production_min_area(int height, int width) {
  return static_cast<int>(std::ceil(0.0005 * static_cast<double>(height) * width));
}

std::vector<Region> connected_components(const ChangeMask& mask, Connectivity connectivity) {
  const int H = static_cast<int>(mask.rows());
  const int W = static_cast<int>(mask.cols());
  Plane<int> label = Plane<int>::Constant(H, W, -1);
  std::vector<Region> regions;
  std::vector<Pixel> stack;
  const bool eight = connectivity == Connectivity::eight;

  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (!mask(r, c) || label(r, c) >= 0) continue;
      const int id = static_cast<int>(regions.size());
      Region region;
      stack.assign(1, {r, c});
      label(r, c) = id;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        region.pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dy == 0 && dx == 0) || (!eight && dy != 0 && dx != 0)) continue;
            const int y = p.row + dy, x = p.col + dx;
            if (y < 0 || x < 0 || y >= H || x >= W || !mask(y, x) || label(y, x) >= 0) continue;
            label(y, x) = id;
            stack.push_back({y, x});
          }
      }
      std::sort(region.pixels.begin(), region.pixels.end(),
                [](const Pixel& a, const Pixel& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
      region.bbox = {H, W, -1, -1};
      for (const Pixel& p : region.pixels) {
        region.bbox.top = std::min(region.bbox.top, p.row);
        region.bbox.left = std::min(region.bbox.left, p.col);
        region.bbox.bottom = std::max(region.bbox.bottom, p.row);
        region.bbox.right = std::max(region.bbox.right, p.col);
      }
      regions.push_back(std::move(region));
    }
  return regions;
}

std::vector<Region> filter_min_area(std::vector<Region> regions, int min_area) {
  std::erase_if(regions, [min_area](const Region& r) { return r.area() < min_area; });
  return regions;
}

ChangeMask regions_to_mask(const std::vector<Region>& regions, int height, int width) {
  ChangeMask mask = ChangeMask::Zero(height, width);
  for (const auto& r : regions)
    for (const Pixel& p : r.pixels) mask(p.row, p.col) = 1;
  return mask;
}

Eigen::MatrixXi intersection_counts(const std::vector<Region>& pred, const std::vector<Region>& gt) {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(pred.size()), static_cast<Eigen::Index>(gt.size()));
  if (pred.empty() || gt.empty()) return counts;
  int H = 0, W = 0;
  for (const auto* set : {&pred, &gt})
    for (const auto& r : *set) {
      H = std::max(H, r.bbox.bottom + 1);
      W = std::max(W, r.bbox.right + 1);
    }
  Plane<int> owner = Plane<int>::Constant(H, W, -1);
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (const Pixel& p : gt[g].pixels) owner(p.row, p.col) = static_cast<int>(g);
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (const Pixel& p : pred[i].pixels)
      if (const int g = owner(p.row, p.col); g >= 0) ++counts(static_cast<Eigen::Index>(i), g);
  return counts;
}

RegionMatchResult match_regions(const std::vector<Region>& pred, const std::vector<Region>& gt,
                                const EvalConfig& config) {
  const Eigen::MatrixXi inter = intersection_counts(pred, gt);
  std::vector<Match> candidates;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p)
    for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
      const int n = inter(p, g);
      if (n == 0) continue;
      const double iou = static_cast<double>(n) / static_cast<double>(pred[static_cast<std::size_t>(p)].area() +
                                                                         gt[static_cast<std::size_t>(g)].area() - n);
      const bool ok = config.match_mode == MatchMode::any_overlap || iou >= config.iou_tau;
      if (ok) candidates.push_back({p, g, iou});
    }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return a.pred != b.pred ? a.pred < b.pred : a.gt < b.gt;
  });

  RegionMatchResult result;
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  for (const Match& m : candidates) {
    if (pred_used[static_cast<std::size_t>(m.pred)] || gt_used[static_cast<std::size_t>(m.gt)]) continue;
    pred_used[static_cast<std::size_t>(m.pred)] = gt_used[static_cast<std::size_t>(m.gt)] = true;
    result.matches.push_back(m);
  }
  result.tp = static_cast<int>(result.matches.size());
  result.fp = static_cast<int>(pred.size()) - result.tp;
  result.fn = static_cast<int>(gt.size()) - result.tp;
  return result;
}

Prf1 prf1(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw ConfigError("prf1: counts must be >= 0");
  Prf1 out;
  out.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

} // namespace scd::eval
