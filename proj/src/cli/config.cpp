// SPDX-License-Identifier: Apache-2.0

#include "scd/cli/config.hpp"

#include <fstream>
#include <set>

namespace scd::cli {

using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name, std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : section.items())
    if (!ok.count(key)) throw ConfigError("unknown config key '" + name + "." + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

synth::BranchPolicy branch_policy_from_string(const std::string& s) {
  if (s == "t0_only") return synth::BranchPolicy::t0_only;
  if (s == "t1_only") return synth::BranchPolicy::t1_only;
  if (s == "either") return synth::BranchPolicy::either;
  throw ConfigError("unknown paste_branch_policy '" + s + "'");
}

const char* to_string(synth::BranchPolicy p) {
  switch (p) {
    case synth::BranchPolicy::t0_only: return "t0_only";
    case synth::BranchPolicy::t1_only: return "t1_only";
    case synth::BranchPolicy::either: return "either";
  }
  return "?";
}

net::BackboneSpec backbone_from_json(const json& j, int default_tap) {
  check_keys(j, "train.backbone", {"family", "input_channels", "layers", "tap_layer"});
  net::BackboneSpec spec;
  const std::string family = j.value("family", "tiny");
  if (family == "tiny") {
    spec = net::BackboneSpec::tiny(j.value("tap_layer", default_tap));
    return spec;
  }
  spec.family = net::backbone_family_from_string(family);
  spec.input_channels = j.value("input_channels", 3);
  for (const auto& l : j.at("layers"))
    spec.layers.push_back({l.at("name").get<std::string>(), l.at("out_channels").get<int>(), l.value("stride", 1)});
  spec.tap_layer = j.value("tap_layer", static_cast<int>(spec.layers.size()));
  return spec;
}

} // namespace

void CliConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.rng_seed = s;
  train.synth.rng_seed = s;
}

void CliConfig::validate() const {
  train.validate();
  eval.validate();
  if (assets.scene_count < 1 || assets.cutout_count < 1 || assets.shadow_count < 1)
    throw ConfigError("asset counts must be >= 1");
  if (assets.cutout_min_size < 2 || assets.cutout_max_size < assets.cutout_min_size)
    throw ConfigError("cutout size range is invalid");
  if (assets.cutout_max_size > std::min(train.height, train.width))
    throw ConfigError("cutouts must fit inside the image");
  if (train.height < 32 || train.width < 32) throw ConfigError("image size must be at least 32x32");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
}

void merge_json(CliConfig& c, const json& doc) {
  try {
    check_keys(doc, "<root>", {"seed", "image", "synth", "train", "loss", "eval"});
    if (doc.contains("seed")) c.apply_seed(doc.at("seed").get<std::uint64_t>());
    if (doc.contains("image")) {
      const json& j = doc.at("image");
      check_keys(j, "image", {"height", "width"});
      read(j, "height", c.train.height);
      read(j, "width", c.train.width);
    }
    if (doc.contains("synth")) {
      const json& j = doc.at("synth");
      check_keys(j, "synth",
                 {"paste_rate", "paste_branch_policy", "shadow_probability", "shadow_weight_range",
                  "photometric_severity", "median_kernel", "alpha_threshold", "scene_count", "cutout_count",
                  "cutout_min_size", "cutout_max_size", "shadow_count", "backgrounds", "cutouts_dir", "shadows_dir",
                  "split"});
      auto& s = c.train.synth;
      read(j, "paste_rate", s.paste_rate);
      if (j.contains("paste_branch_policy")) s.paste_branch_policy = branch_policy_from_string(j.at("paste_branch_policy"));
      read(j, "shadow_probability", s.shadow_probability);
      if (j.contains("shadow_weight_range")) {
        const auto r = j.at("shadow_weight_range").get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("shadow_weight_range must be [lo, hi]");
        s.shadow_weight_range = {r[0], r[1]};
      }
      read(j, "photometric_severity", s.photometric_severity);
      read(j, "median_kernel", s.median_kernel);
      read(j, "alpha_threshold", s.alpha_threshold);
      read(j, "scene_count", c.assets.scene_count);
      read(j, "cutout_count", c.assets.cutout_count);
      read(j, "cutout_min_size", c.assets.cutout_min_size);
      read(j, "cutout_max_size", c.assets.cutout_max_size);
      read(j, "shadow_count", c.assets.shadow_count);
      if (j.contains("backgrounds")) c.assets.backgrounds = j.at("backgrounds").get<std::string>();
      if (j.contains("cutouts_dir")) c.assets.cutouts_dir = j.at("cutouts_dir").get<std::string>();
      if (j.contains("shadows_dir")) c.assets.shadows_dir = j.at("shadows_dir").get<std::string>();
      if (j.contains("split")) c.assets.split = split_from_string(j.at("split").get<std::string>());
      c.train.cutout_bank_size = c.assets.cutout_count;
      c.train.cutout_min_size = c.assets.cutout_min_size;
      c.train.cutout_max_size = c.assets.cutout_max_size;
      c.train.shadow_bank_size = c.assets.shadow_count;
    }
    if (doc.contains("train")) {
      const json& j = doc.at("train");
      check_keys(j, "train",
                 {"batch_size", "max_iter", "base_lr", "power", "trainable_tail_k", "weight_tying", "on_the_fly",
                  "threads", "tap_layer", "backbone", "pretrained", "log_every", "adam_beta1", "adam_beta2",
                  "adam_eps", "distractor_rate", "branch_swap", "resynthesis_probability",
                  "decoder_widths"});
      auto& t = c.train;
      read(j, "batch_size", t.batch_size);
      read(j, "max_iter", t.max_iter);
      read(j, "base_lr", t.schedule.base_lr);
      read(j, "power", t.schedule.power);
      read(j, "trainable_tail_k", t.trainable_tail_k);
      if (j.contains("weight_tying")) t.weight_tying = net::weight_tying_from_string(j.at("weight_tying").get<std::string>());
      read(j, "on_the_fly", t.on_the_fly_augmentation);
      read(j, "threads", t.threads);
      read(j, "distractor_rate", t.distractor_rate);
      read(j, "branch_swap", t.branch_swap);
      read(j, "resynthesis_probability", t.resynthesis_probability);
      read(j, "decoder_widths", t.decoder_widths);
      read(j, "adam_beta1", t.adam.beta1);
      read(j, "adam_beta2", t.adam.beta2);
      read(j, "adam_eps", t.adam.eps);
      if (j.contains("backbone")) t.backbone = backbone_from_json(j.at("backbone"), t.backbone.tap_layer);
      if (j.contains("tap_layer")) t.backbone.tap_layer = j.at("tap_layer").get<int>();
      if (j.contains("pretrained")) c.pretrained = j.at("pretrained").get<std::string>();
      read(j, "log_every", c.log_every);
    }
    if (doc.contains("loss")) {
      const json& j = doc.at("loss");
      check_keys(j, "loss", {"mode", "epsilon", "clamp_eps", "dice_reduction"});
      auto& l = c.train.loss;
      if (j.contains("mode")) l.mode = objective::loss_mode_from_string(j.at("mode").get<std::string>());
      read(j, "epsilon", l.epsilon);
      read(j, "clamp_eps", l.clamp_eps);
      if (j.contains("dice_reduction")) {
        const std::string r = j.at("dice_reduction");
        if (r == "per_image") l.dice_reduction = objective::DiceReduction::per_image;
        else if (r == "batch") l.dice_reduction = objective::DiceReduction::batch;
        else throw ConfigError("dice_reduction must be per_image or batch");
      }
    }
    if (doc.contains("eval")) {
      const json& j = doc.at("eval");
      check_keys(j, "eval", {"threshold", "connectivity", "min_area", "match_mode", "iou_tau", "symmetric"});
      read(j, "threshold", c.eval.binarize_threshold);
      if (j.contains("connectivity")) c.eval.connectivity = eval::connectivity_from_int(j.at("connectivity").get<int>());
      read(j, "min_area", c.eval.min_area);
      if (j.contains("match_mode")) c.eval.match_mode = eval::match_mode_from_string(j.at("match_mode").get<std::string>());
      read(j, "iou_tau", c.eval.iou_tau);
      read(j, "symmetric", c.eval.symmetric);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

CliConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  CliConfig c;
  merge_json(c, doc);
  return c;
}

nlohmann::ordered_json to_json(const CliConfig& c) {
  using nlohmann::ordered_json;
  const auto& t = c.train;
  ordered_json layers = ordered_json::array();
  for (const auto& l : t.backbone.layers) layers.push_back({{"name", l.name}, {"out_channels", l.out_channels}, {"stride", l.stride}});
  return {
      {"seed", c.seed},
      {"image", {{"height", t.height}, {"width", t.width}}},
      {"synth",
       {{"paste_rate", t.synth.paste_rate},
        {"paste_branch_policy", to_string(t.synth.paste_branch_policy)},
        {"shadow_probability", t.synth.shadow_probability},
        {"shadow_weight_range", {t.synth.shadow_weight_range.first, t.synth.shadow_weight_range.second}},
        {"photometric_severity", t.synth.photometric_severity},
        {"median_kernel", t.synth.median_kernel},
        {"alpha_threshold", t.synth.alpha_threshold},
        {"scene_count", c.assets.scene_count},
        {"cutout_count", c.assets.cutout_count},
        {"cutout_min_size", c.assets.cutout_min_size},
        {"cutout_max_size", c.assets.cutout_max_size},
        {"shadow_count", c.assets.shadow_count}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"max_iter", t.max_iter},
        {"base_lr", t.schedule.base_lr},
        {"power", t.schedule.power},
        {"trainable_tail_k", t.trainable_tail_k},
        {"weight_tying", net::to_string(t.weight_tying)},
        {"on_the_fly", t.on_the_fly_augmentation},
        {"distractor_rate", t.distractor_rate},
        {"branch_swap", t.branch_swap},
        {"resynthesis_probability", t.resynthesis_probability},
        {"decoder_widths", t.decoder_widths},
        {"backbone",
         {{"family", net::to_string(t.backbone.family)},
          {"input_channels", t.backbone.input_channels},
          {"tap_layer", t.backbone.tap_layer},
          {"layers", layers}}}}},
      {"loss",
       {{"mode", objective::to_string(t.loss.mode)},
        {"epsilon", t.loss.epsilon},
        {"clamp_eps", t.loss.clamp_eps},
        {"dice_reduction", t.loss.dice_reduction == objective::DiceReduction::per_image ? "per_image" : "batch"}}},
      {"eval",
       {{"threshold", c.eval.binarize_threshold},
        {"connectivity", static_cast<int>(c.eval.connectivity)},
        {"min_area", c.eval.min_area},
        {"match_mode", eval::to_string(c.eval.match_mode)},
        {"iou_tau", c.eval.iou_tau},
        {"symmetric", c.eval.symmetric}}}};
}

} // namespace scd::cli
