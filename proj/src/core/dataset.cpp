// SPDX-License-Identifier: Apache-2.0

#include "scd/core/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "scd/core/hash.hpp"
#include "scd/core/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scd {
namespace {

fs::path resolve_manifest(const fs::path& p) {
  return fs::is_directory(p) ? p / DatasetManifest::kFileName : p;
}

bool valid_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." &&
         std::all_of(id.begin(), id.end(), [](char ch) {
           return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
         });
}

} // namespace

DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = resolve_manifest(path);
  std::ifstream in(file);
  if (!in) throw LoadError("missing file: " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("cannot parse manifest " + file.string() + ": " + e.what());
  }

  DatasetManifest manifest;
  try {
    manifest.format_version = doc.at("format_version").get<int>();
    if (manifest.format_version != DatasetManifest::kFormatVersion)
      throw VersionError("manifest " + file.string() + " has format_version " +
                         std::to_string(manifest.format_version));
    std::set<std::string> seen;
    for (const json& r : doc.at("records")) {
      ManifestRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.t0_path = r.at("t0_path").get<std::string>();
      rec.t1_path = r.at("t1_path").get<std::string>();
      if (r.contains("mask_path") && !r["mask_path"].is_null()) rec.mask_path = r["mask_path"].get<std::string>();
      rec.split = split_from_string(r.value("split", "train"));
      rec.provenance = provenance_from_string(r.value("provenance", "real"));
      if (!seen.insert(rec.id).second) throw FormatError("duplicate record id '" + rec.id + "'");
      if (rec.split == Split::train && !rec.mask_path)
        throw FormatError("train record '" + rec.id + "' has no mask");
      manifest.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + file.string() + ": " + e.what());
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    json j = {{"id", r.id},
              {"t0_path", r.t0_path},
              {"t1_path", r.t1_path},
              {"split", to_string(r.split)},
              {"provenance", to_string(r.provenance)}};
    j["mask_path"] = r.mask_path ? json(*r.mask_path) : json(nullptr);
    records.push_back(std::move(j));
  }
  json doc = {{"format_version", manifest.format_version}, {"records", std::move(records)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<LabeledSample> load_dataset(const fs::path& manifest_path) {
  const fs::path file = resolve_manifest(manifest_path);
  const DatasetManifest manifest = read_manifest(file);
  const fs::path root = file.parent_path();

  // Fail on the first missing path before decoding anything.
  for (const auto& r : manifest.records) {
    for (const std::string* rel : {&r.t0_path, &r.t1_path})
      if (!fs::exists(root / *rel)) throw LoadError("missing file: " + (root / *rel).string());
    if (r.mask_path && !fs::exists(root / *r.mask_path))
      throw LoadError("missing file: " + (root / *r.mask_path).string());
  }

  std::vector<LabeledSample> samples;
  samples.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    LabeledSample s;
    s.pair.scene_id = r.id;
    s.pair.t0 = io::read_rgb(root / r.t0_path);
    s.pair.t1 = io::read_rgb(root / r.t1_path);
    if (r.mask_path) s.mask = io::read_mask(root / *r.mask_path);
    s.split = r.split;
    s.provenance = r.provenance;
    validate(s);
    samples.push_back(std::move(s));
  }
  return samples;
}

DatasetManifest save_dataset(const std::vector<LabeledSample>& samples, const fs::path& out_dir) {
  std::error_code ec;
  for (const char* sub : {"t0", "t1", "masks"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  DatasetManifest manifest;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    const std::string& id = s.pair.scene_id;
    if (!valid_id(id)) throw FormatError("sample id '" + id + "' is not a valid file stem");
    if (!seen.insert(id).second) throw FormatError("duplicate sample id '" + id + "'");
    validate(s);

    ManifestRecord rec;
    rec.id = id;
    rec.t0_path = "t0/" + id + ".png";
    rec.t1_path = "t1/" + id + ".png";
    rec.split = s.split;
    rec.provenance = s.provenance;
    io::write_png(out_dir / rec.t0_path, s.pair.t0);
    io::write_png(out_dir / rec.t1_path, s.pair.t1);
    if (s.has_mask()) {
      rec.mask_path = "masks/" + id + ".png";
      io::write_mask(out_dir / *rec.mask_path, s.mask);
    }
    manifest.records.push_back(std::move(rec));
  }
  write_manifest(out_dir / DatasetManifest::kFileName, manifest);
  return manifest;
}

std::string dataset_hash(const fs::path& root_or_manifest) {
  const fs::path file = resolve_manifest(root_or_manifest);
  const fs::path root = file.parent_path();
  const DatasetManifest manifest = read_manifest(file);
  Sha256 sha;
  sha.update_file(file);
  for (const auto& r : manifest.records) {
    sha.update_file(root / r.t0_path);
    sha.update_file(root / r.t1_path);
    if (r.mask_path) sha.update_file(root / *r.mask_path);
  }
  return sha.hex();
}

std::vector<LabeledSample> select_split(const std::vector<LabeledSample>& samples, Split split) {
  std::vector<LabeledSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [split](const LabeledSample& s) { return s.split == split; });
  return out;
}

} // namespace scd
