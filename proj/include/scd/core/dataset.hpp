// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scd/core/types.hpp"

namespace scd {

struct ManifestRecord {
  std::string id;
  std::string t0_path;
  std::string t1_path;
  std::optional<std::string> mask_path;
  Split split = Split::train;
  Provenance provenance = Provenance::real;
};

/// On-disk dataset index. Paths are relative to the directory holding
/// the manifest file.
struct DatasetManifest {
  static constexpr int kFormatVersion = 1;
  static constexpr const char* kFileName = "manifest.json";

  int format_version = kFormatVersion;
  std::vector<ManifestRecord> records;
};

DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const DatasetManifest& manifest);

/// Loads every record of the manifest, in order. `manifest_path` may
/// name the manifest file or the dataset root directory.
std::vector<LabeledSample> load_dataset(const std::filesystem::path& manifest_path);

/// Writes t0/, t1/, masks/ PNG files and manifest.json under out_dir.
DatasetManifest save_dataset(const std::vector<LabeledSample>& samples, const std::filesystem::path& out_dir);

/// SHA-256 over the manifest and every referenced file, in record order.
std::string dataset_hash(const std::filesystem::path& root);

std::vector<LabeledSample> select_split(const std::vector<LabeledSample>& samples, Split split);

} // namespace scd
