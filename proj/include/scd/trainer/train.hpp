// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "scd/net/model.hpp"
#include "scd/objective/loss.hpp"
#include "scd/objective/schedule.hpp"
#include "scd/synthlab/synth.hpp"
#include "scd/trainer/adam.hpp"

namespace scd::trainer {

using Model = net::ChangeModel<float>;

struct TrainRecord {
  long iter = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_bce = 0.0;
  double loss_dice = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::string checkpoint_path;
};

struct TrainConfig {
  int batch_size = 8;
  int height = 128;
  int width = 256;
  long max_iter = 2000;
  AdamConfig adam;
  objective::PolySchedule schedule;  // max_iter is synced from TrainConfig::max_iter
  objective::LossConfig loss;
  synth::SynthConfig synth;
  net::BackboneSpec backbone = net::BackboneSpec::tiny();
  /// Negative means every encoder layer up to the tap.
  int trainable_tail_k = -1;
  net::WeightTying weight_tying = net::WeightTying::untied;
  std::uint64_t rng_seed = 0;

  /// Paste/shadow/photometric augmentation applied to every drawn sample.
  bool on_the_fly_augmentation = true;
  int cutout_bank_size = 256;
  int cutout_min_size = 16;
  int cutout_max_size = 40;
  int shadow_bank_size = 512;
  /// Mean number of cutouts pasted identically into both branches before
  /// synthesis. They add unchanged structure whose appearance still differs
  /// after per-branch shadow and photometric jitter.
  double distractor_rate = 1.5;
  /// Swap t0 and t1 with probability 1/2. The OR label is symmetric.
  bool branch_swap = true;
  /// Probability that a drawn sample is re-synthesized (paste, shadow,
  /// photometric) on top of its stored augmentation.
  double resynthesis_probability = 1.0;
  /// Decoder block widths; empty selects the model default.
  std::vector<int> decoder_widths;

  /// Worker threads for per-sample forward/backward; 0 = hardware concurrency.
  /// Results do not depend on this value.
  int threads = 0;

  std::function<void(const TrainRecord&)> on_iteration;

  void validate() const;
  objective::PolySchedule effective_schedule() const;
};

struct TrainResult {
  Model model;
  TrainLog log;
};

/// Fresh model for the config's backbone, tying and tail (seeded from rng_seed).
Model make_model(const TrainConfig& config);

/// Runs config.max_iter Adam steps at poly_lr(iter). Throws NumericalError
/// on a non-finite loss.
TrainResult train(Model model, const std::vector<LabeledSample>& dataset, const TrainConfig& config);

/// Augmentation assets used by on-the-fly synthesis, derived from the seed.
struct AugmentationAssets {
  std::vector<synth::ObjectCutout> cutouts;
  std::vector<synth::ShadowPattern> shadows;
};
AugmentationAssets make_assets(const TrainConfig& config, int height, int width);

/// One JSON object per line.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);

} // namespace scd::trainer
