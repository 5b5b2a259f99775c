// SPDX-License-Identifier: Apache-2.0

#include "scd/evalkit/evaluate.hpp"

#include <algorithm>

namespace scd::eval {

Predictor model_predictor(const net::ChangeModel<float>& model, bool symmetric) {
  if (!symmetric) return [&model](const ImagePair& pair) { return model.forward(pair); };
  return [&model](const ImagePair& pair) {
    const ImagePair swapped{pair.t1, pair.t0, pair.scene_id};
    ProbabilityMask<float> p = model.forward(pair);
    p = 0.5f * (p + model.forward(swapped));
    return p;
  };
}

std::vector<Region> predicted_regions(const ProbabilityMask<float>& prob, const EvalConfig& config) {
  return filter_min_area(connected_components(binarize(prob, config.binarize_threshold), config.connectivity),
                         config.min_area);
}

EvalReport evaluate_predictions(const std::vector<ProbabilityMask<float>>& predictions,
                                const std::vector<LabeledSample>& dataset, const EvalConfig& config) {
  config.validate();
  if (predictions.size() != dataset.size()) throw ShapeError("evaluate: one prediction per sample is required");
  EvalReport report;
  report.config = config;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledSample& s = dataset[i];
    if (!s.has_mask()) throw ConfigError("evaluate: sample '" + s.pair.scene_id + "' has no ground-truth mask");
    const auto& prob = predictions[i];
    if (prob.rows() != s.mask.rows() || prob.cols() != s.mask.cols())
      throw ShapeError("evaluate: prediction dims differ from mask dims for '" + s.pair.scene_id + "'");
    const auto pred = predicted_regions(prob, config);
    const auto gt = connected_components(s.mask, config.connectivity);
    ImageResult r{s.pair.scene_id, static_cast<int>(pred.size()), static_cast<int>(gt.size()),
                  match_regions(pred, gt, config)};
    report.tp += r.match.tp;
    report.fp += r.match.fp;
    report.fn += r.match.fn;
    report.per_image.push_back(std::move(r));
  }
  report.metrics = prf1(report.tp, report.fp, report.fn);
  return report;
}

EvalReport evaluate(const Predictor& predictor, const std::vector<LabeledSample>& dataset, const EvalConfig& config) {
  config.validate();
  std::vector<ProbabilityMask<float>> predictions;
  predictions.reserve(dataset.size());
  for (const auto& s : dataset) predictions.push_back(predictor(s.pair));
  return evaluate_predictions(predictions, dataset, config);
}

EvalReport evaluate(const net::ChangeModel<float>& model, const std::vector<LabeledSample>& dataset,
                    const EvalConfig& config) {
  return evaluate(model_predictor(model, config.symmetric), dataset, config);
}

double pr_auc(std::vector<PrPoint> points) {
  if (points.empty()) return 0.0;
  std::stable_sort(points.begin(), points.end(), [](const PrPoint& a, const PrPoint& b) {
    return a.recall != b.recall ? a.recall < b.recall : a.precision > b.precision;
  });
  double area = points.front().recall * points.front().precision;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].recall - points[i - 1].recall) * 0.5 * (points[i].precision + points[i - 1].precision);
  return area;
}

PrCurve pr_curve(const Predictor& predictor, const std::vector<LabeledSample>& dataset,
                 const std::vector<double>& thresholds, const EvalConfig& config) {
  if (thresholds.empty()) throw ConfigError("pr_curve: no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) throw ConfigError("pr_curve: thresholds must lie in (0,1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw ConfigError("pr_curve: thresholds must strictly increase");
  }
  std::vector<ProbabilityMask<float>> predictions;
  predictions.reserve(dataset.size());
  for (const auto& s : dataset) predictions.push_back(predictor(s.pair));

  PrCurve curve;
  for (double t : thresholds) {
    EvalConfig c = config;
    c.binarize_threshold = t;
    const EvalReport r = evaluate_predictions(predictions, dataset, c);
    curve.points.push_back({t, r.metrics.precision, r.metrics.recall});
  }
  curve.auc = pr_auc(curve.points);
  return curve;
}

} // namespace scd::eval
