// SPDX-License-Identifier: Apache-2.0

#include "scd/trainer/ablation.hpp"

#include <cstdio>
#include <fstream>

namespace scd::trainer {
namespace {

int parse_int(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(what) + " expects an integer, got '" + s + "'");
}

} // namespace

std::string_view to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::tap_layer: return "tap_layer";
    case AblationAxis::trainable_tail: return "trainable_tail";
    case AblationAxis::loss_mode: return "loss_mode";
    case AblationAxis::shadow_aug: return "shadow_aug";
  }
  return "?";
}

AblationAxis ablation_axis_from_string(std::string_view s) {
  for (auto axis : {AblationAxis::tap_layer, AblationAxis::trainable_tail, AblationAxis::loss_mode, AblationAxis::shadow_aug})
    if (s == to_string(axis)) return axis;
  throw ConfigError("unknown ablation axis '" + std::string(s) +
                    "'; valid axes: tap_layer, trainable_tail, loss_mode, shadow_aug");
}

TrainConfig apply_axis(const TrainConfig& base, AblationAxis axis, const std::string& value) {
  TrainConfig c = base;
  switch (axis) {
    case AblationAxis::tap_layer:
      c.backbone.tap_layer = parse_int(value, "tap_layer");
      if (c.trainable_tail_k > c.backbone.tap_layer) c.trainable_tail_k = c.backbone.tap_layer;
      break;
    case AblationAxis::trainable_tail:
      c.trainable_tail_k = parse_int(value, "trainable_tail");
      break;
    case AblationAxis::loss_mode:
      c.loss.mode = objective::loss_mode_from_string(value);
      break;
    case AblationAxis::shadow_aug:
      if (value == "off") {
        c.synth.shadow_probability = 0.0;
      } else if (value == "on") {
        if (c.synth.shadow_probability <= 0.0) c.synth.shadow_probability = 0.5;
      } else {
        throw ConfigError("shadow_aug expects off or on, got '" + value + "'");
      }
      break;
  }
  c.validate();
  return c;
}

std::vector<AblationRow> run_ablation(AblationAxis axis, const std::vector<std::string>& values,
                                      const TrainConfig& base, const std::vector<LabeledSample>& train_set,
                                      const std::vector<LabeledSample>& test_set, const eval::EvalConfig& eval_config,
                                      const std::function<void(const std::string&, const TrainResult&)>& on_trained) {
  if (values.empty()) throw ConfigError("ablation needs at least one value");
  eval_config.validate();
  // Validate every value before any training starts.
  std::vector<TrainConfig> configs;
  for (const auto& v : values) configs.push_back(apply_axis(base, axis, v));

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    TrainResult trained = train(make_model(configs[i]), train_set, configs[i]);
    const eval::EvalReport report = eval::evaluate(trained.model, test_set, eval_config);
    if (on_trained) on_trained(values[i], trained);
    rows.push_back({values[i], report.metrics});
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "value,precision,recall,f1\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f\n", r.metrics.precision, r.metrics.recall, r.metrics.f1);
    out << r.value << buf;
  }
}

} // namespace scd::trainer
