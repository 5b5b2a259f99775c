// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "scd/evalkit/regions.hpp"
#include "scd/trainer/train.hpp"

namespace scd::cli {

/// Procedural asset settings for `synth`.
struct SynthAssets {
  int scene_count = 200;
  int cutout_count = 256;
  int cutout_min_size = 16;
  int cutout_max_size = 40;
  int shadow_count = 512;
  std::filesystem::path backgrounds;  // dataset dir; empty = procedural scenes
  std::filesystem::path cutouts_dir;
  std::filesystem::path shadows_dir;
  Split split = Split::train;
};

/// Merged configuration: built-in defaults < config file < flags.
struct CliConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  SynthAssets assets;
  trainer::TrainConfig train;
  eval::EvalConfig eval;
  std::filesystem::path pretrained;  // optional encoder weight manifest
  int log_every = 50;

  /// Pushes the global seed into every module config.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

/// Overlays a JSON document onto `config`. Unknown keys are a ConfigError.
void merge_json(CliConfig& config, const nlohmann::json& doc);

CliConfig load_config_file(const std::filesystem::path& path);

/// Config echo written next to command outputs.
nlohmann::ordered_json to_json(const CliConfig& config);

} // namespace scd::cli
