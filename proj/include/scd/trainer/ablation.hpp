// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "scd/evalkit/evaluate.hpp"
#include "scd/trainer/train.hpp"

namespace scd::trainer {

enum class AblationAxis { tap_layer, trainable_tail, loss_mode, shadow_aug };

std::string_view to_string(AblationAxis axis);
/// Throws ConfigError listing the valid axes.
AblationAxis ablation_axis_from_string(std::string_view s);

struct AblationRow {
  std::string value;
  eval::Prf1 metrics;
};

/// Returns `base` with one axis set to `value`. shadow_aug takes off/on;
/// "on" keeps the base shadow_probability, or 0.5 when the base has none.
TrainConfig apply_axis(const TrainConfig& base, AblationAxis axis, const std::string& value);

/// Trains one model per value from identical seeds and evaluates each on
/// the same held-out set.
std::vector<AblationRow> run_ablation(AblationAxis axis, const std::vector<std::string>& values,
                                      const TrainConfig& base, const std::vector<LabeledSample>& train_set,
                                      const std::vector<LabeledSample>& test_set, const eval::EvalConfig& eval_config,
                                      const std::function<void(const std::string&, const TrainResult&)>& on_trained = {});

/// Header row `value,precision,recall,f1`.
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

} // namespace scd::trainer
