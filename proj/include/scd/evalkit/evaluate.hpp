// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "scd/evalkit/regions.hpp"
#include "scd/net/model.hpp"

namespace scd::eval {

using Predictor = std::function<ProbabilityMask<float>(const ImagePair&)>;

/// With `symmetric`, returns the mean of forward(t0, t1) and forward(t1, t0).
Predictor model_predictor(const net::ChangeModel<float>& model, bool symmetric = false);

/// Binarize, label components, drop regions below min_area.
std::vector<Region> predicted_regions(const ProbabilityMask<float>& prob, const EvalConfig& config);

struct ImageResult {
  std::string id;
  int pred_regions = 0;
  int gt_regions = 0;
  RegionMatchResult match;
};

struct EvalReport {
  EvalConfig config;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  Prf1 metrics;
  std::vector<ImageResult> per_image;
};

/// Micro-averaged object-level evaluation over a labeled dataset.
EvalReport evaluate(const Predictor& predictor, const std::vector<LabeledSample>& dataset, const EvalConfig& config);

EvalReport evaluate(const net::ChangeModel<float>& model, const std::vector<LabeledSample>& dataset,
                    const EvalConfig& config);

/// Same as evaluate() for already computed probability masks (one per sample).
EvalReport evaluate_predictions(const std::vector<ProbabilityMask<float>>& predictions,
                                const std::vector<LabeledSample>& dataset, const EvalConfig& config);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;
  double auc = 0.0;
};

/// Trapezoid area over recall-sorted points, anchored at recall 0 with the
/// precision of the lowest-recall point.
double pr_auc(std::vector<PrPoint> points);

/// Sweeps binarize_threshold over strictly increasing thresholds in (0,1);
/// the predictor runs once per image.
PrCurve pr_curve(const Predictor& predictor, const std::vector<LabeledSample>& dataset,
                 const std::vector<double>& thresholds, const EvalConfig& config);

} // namespace scd::eval
