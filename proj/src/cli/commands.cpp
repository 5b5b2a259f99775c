// SPDX-License-Identifier: Apache-2.0

#include "scd/cli/commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "scd/cli/plot.hpp"
#include "scd/core/dataset.hpp"
#include "scd/core/hash.hpp"
#include "scd/core/image_io.hpp"
#include "scd/evalkit/report.hpp"
#include "scd/net/checkpoint.hpp"
#include "scd/synthlab/procedural.hpp"
#include "scd/trainer/ablation.hpp"

namespace fs = std::filesystem;

namespace scd::cli {
namespace {

// Salts for the procedural asset streams of `synth`.
constexpr std::uint64_t kSceneSalt = 0x5CE7u;
constexpr std::uint64_t kCutoutSalt = 0xC07u;
constexpr std::uint64_t kShadowSalt = 0x5AADu;

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<LabeledSample> training_samples(const fs::path& dataset) {
  std::vector<LabeledSample> all = load_dataset(dataset);
  std::vector<LabeledSample> train = select_split(all, Split::train);
  return train.empty() ? all : train;
}

std::vector<LabeledSample> labeled_samples(const fs::path& dataset) {
  std::vector<LabeledSample> all = load_dataset(dataset);
  std::erase_if(all, [](const LabeledSample& s) { return !s.has_mask(); });
  return all;
}

// Image size for training comes from the data; the config only has to agree
// with the tap stride.
void adopt_image_size(CliConfig& config, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw ConfigError("dataset has no usable samples");
  config.train.height = samples.front().pair.t0.height;
  config.train.width = samples.front().pair.t0.width;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  // synth
  std::optional<int> count;
  std::optional<std::string> split, backgrounds, cutouts, shadows;
  std::optional<double> paste_rate, shadow_prob, severity;
  std::optional<int> scenes, height, width;

  // train
  std::optional<std::string> loss, tied, pretrained;
  std::optional<int> tail, batch, tap, threads, log_every;
  std::optional<long> max_iter;
  std::optional<double> lr;
  std::optional<bool> on_the_fly;

  // eval
  std::optional<double> threshold, iou_tau;
  std::optional<int> min_area, connectivity;
  std::optional<std::string> match_mode;
  std::optional<bool> symmetric;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--seed", o.seed, "Global RNG seed");
  sub->add_option("--out", o.out, "Output directory");
}

void add_train_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--loss", o.loss, "bce | dice | bce+dice");
  sub->add_option("--tail", o.tail, "Trainable encoder layers before the tap");
  sub->add_option("--tied", o.tied, "Share encoder weights (true/false)");
  sub->add_option("--max-iter", o.max_iter, "Optimization steps");
  sub->add_option("--batch", o.batch, "Batch size");
  sub->add_option("--tap", o.tap, "Tap layer of the backbone");
  sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  sub->add_option("--lr", o.lr, "Base learning rate");
  sub->add_option("--on-the-fly", o.on_the_fly, "On-the-fly augmentation (true/false)");
  sub->add_option("--pretrained", o.pretrained, "Encoder weight manifest to import");
  sub->add_option("--log-every", o.log_every, "Progress line interval");
}

void add_eval_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--threshold", o.threshold, "Binarization threshold");
  sub->add_option("--min-area", o.min_area, "Minimum region area in pixels");
  sub->add_option("--match-mode", o.match_mode, "iou_threshold | any_overlap");
  sub->add_option("--connectivity", o.connectivity, "4 or 8");
  sub->add_option("--iou-tau", o.iou_tau, "IoU acceptance threshold");
  sub->add_option("--symmetric", o.symmetric, "Average with the swapped-pair prediction (true/false)");
}

CliConfig merge(const Overrides& o) {
  CliConfig c = o.config.empty() ? CliConfig{} : load_config_file(o.config);
  if (o.seed) c.apply_seed(*o.seed);
  if (o.out) c.out = *o.out;

  if (o.split) c.assets.split = split_from_string(*o.split);
  if (o.backgrounds) c.assets.backgrounds = *o.backgrounds;
  if (o.cutouts) c.assets.cutouts_dir = *o.cutouts;
  if (o.shadows) c.assets.shadows_dir = *o.shadows;
  if (o.paste_rate) c.train.synth.paste_rate = *o.paste_rate;
  if (o.shadow_prob) c.train.synth.shadow_probability = *o.shadow_prob;
  if (o.severity) c.train.synth.photometric_severity = *o.severity;
  if (o.scenes) c.assets.scene_count = *o.scenes;
  if (o.height) c.train.height = *o.height;
  if (o.width) c.train.width = *o.width;

  if (o.loss) c.train.loss.mode = objective::loss_mode_from_string(*o.loss);
  if (o.tied) c.train.weight_tying = net::weight_tying_from_string(*o.tied);
  if (o.pretrained) c.pretrained = *o.pretrained;
  if (o.tap) c.train.backbone.tap_layer = *o.tap;
  if (o.tail) c.train.trainable_tail_k = *o.tail;
  if (o.batch) c.train.batch_size = *o.batch;
  if (o.threads) c.train.threads = *o.threads;
  if (o.log_every) c.log_every = *o.log_every;
  if (o.max_iter) c.train.max_iter = *o.max_iter;
  if (o.lr) c.train.schedule.base_lr = *o.lr;
  if (o.on_the_fly) c.train.on_the_fly_augmentation = *o.on_the_fly;

  if (o.threshold) c.eval.binarize_threshold = *o.threshold;
  if (o.iou_tau) c.eval.iou_tau = *o.iou_tau;
  if (o.min_area) c.eval.min_area = *o.min_area;
  if (o.connectivity) c.eval.connectivity = eval::connectivity_from_int(*o.connectivity);
  if (o.match_mode) c.eval.match_mode = eval::match_mode_from_string(*o.match_mode);
  if (o.symmetric) c.eval.symmetric = *o.symmetric;
  return c;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

} // namespace

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kUsage;
  } catch (const PlacementError& e) {
    err << "placement error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
}

std::vector<double> default_pr_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 19; ++i) t.push_back(i * 0.05);
  return t;
}

int cmd_synth(const CliConfig& config, int count, std::ostream& out) {
  if (count < 0) throw ConfigError("count must be >= 0");
  config.validate();
  const auto& s = config.train.synth;
  const int H = config.train.height, W = config.train.width;

  std::vector<LabeledSample> backgrounds;
  if (!config.assets.backgrounds.empty()) {
    backgrounds = load_dataset(config.assets.backgrounds);
    for (const auto& b : backgrounds)
      if (b.pair.t0.height != H || b.pair.t0.width != W)
        throw ConfigError("background '" + b.pair.scene_id + "' does not match the configured image size");
  } else {
    for (auto& pair : synth::scene_bank(derive_seed(config.seed, kSceneSalt), config.assets.scene_count, H, W)) {
      LabeledSample bg;
      bg.mask = zero_mask(pair);
      bg.pair = std::move(pair);
      backgrounds.push_back(std::move(bg));
    }
  }
  const auto cutouts = config.assets.cutouts_dir.empty()
                           ? synth::cutout_bank(derive_seed(config.seed, kCutoutSalt), config.assets.cutout_count,
                                                config.assets.cutout_min_size, config.assets.cutout_max_size)
                           : synth::load_cutouts(config.assets.cutouts_dir);
  const auto shadows = config.assets.shadows_dir.empty()
                           ? synth::shadow_bank(derive_seed(config.seed, kShadowSalt), config.assets.shadow_count, H, W)
                           : synth::load_shadows(config.assets.shadows_dir);

  std::vector<LabeledSample> samples =
      count == 0 ? std::vector<LabeledSample>{} : synth::synth_dataset(backgrounds, cutouts, shadows, s, count);
  for (auto& sample : samples) sample.split = config.assets.split;

  make_out_dir(config.out);
  save_dataset(samples, config.out);
  write_text(config.out / "synth_config.json", to_json(config).dump(2) + "\n");
  out << "samples: " << samples.size() << '\n';
  out << "hash: " << dataset_hash(config.out) << '\n';
  return kOk;
}

int cmd_train(const CliConfig& base, const fs::path& dataset, std::ostream& out) {
  CliConfig config = base;
  const std::vector<LabeledSample> samples = training_samples(dataset);
  adopt_image_size(config, samples);
  config.validate();

  trainer::Model model = trainer::make_model(config.train);
  if (!config.pretrained.empty()) {
    const int n = net::import_pretrained(model, config.pretrained);
    out << "imported " << n << " pretrained encoder layers\n";
  }

  make_out_dir(config.out);
  write_text(config.out / "config.json", to_json(config).dump(2) + "\n");

  trainer::TrainConfig tc = config.train;
  const int every = config.log_every;
  tc.on_iteration = [&out, every, &tc](const trainer::TrainRecord& r) {
    if (r.iter % every == 0 || r.iter + 1 == tc.max_iter) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "iter %6ld  lr %.6f  loss %.5f  (bce %.5f dice %.5f)  %.0f ms\n", r.iter, r.lr,
                    r.loss_total, r.loss_bce, r.loss_dice, r.wall_ms);
      out << buf << std::flush;
    }
  };

  trainer::TrainResult result;
  try {
    result = trainer::train(std::move(model), samples, tc);
  } catch (const NumericalError& e) {
    nlohmann::json diag = {{"error", e.what()}, {"iter", e.iteration()}, {"batch_indices", e.batch_indices()}};
    write_text(config.out / "nan_abort.json", diag.dump(2) + "\n");
    throw;
  }

  const fs::path ckpt = config.out / "checkpoint.ckpt";
  net::save_checkpoint(result.model, ckpt);
  result.log.checkpoint_path = ckpt.string();
  trainer::write_train_log(result.log, config.out / "train_log.jsonl");
  out << "checkpoint: " << ckpt.string() << '\n';
  if (!result.log.records.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "first loss %.5f, final loss %.5f\n", result.log.records.front().loss_total,
                  result.log.records.back().loss_total);
    out << buf;
  }
  return kOk;
}

int cmd_eval(const CliConfig& config, const fs::path& checkpoint, const fs::path& dataset,
             const std::vector<double>& pr_thresholds, std::ostream& out, const eval::Predictor& predictor) {
  config.eval.validate();
  std::optional<net::ChangeModel<float>> model;
  eval::Predictor predict = predictor;
  if (!predict) {
    model = net::load_checkpoint<float>(checkpoint);
    predict = eval::model_predictor(*model, config.eval.symmetric);
  }
  const std::vector<LabeledSample> samples = labeled_samples(dataset);

  std::vector<ProbabilityMask<float>> predictions;
  predictions.reserve(samples.size());
  for (const auto& s : samples) predictions.push_back(predict(s.pair));
  const eval::EvalReport report = eval::evaluate_predictions(predictions, samples, config.eval);

  eval::PrCurve curve;
  if (!pr_thresholds.empty()) {
    const std::vector<ProbabilityMask<float>>* cached = &predictions;
    std::size_t next = 0;
    // Reuse the masks computed above instead of running the model again.
    curve = eval::pr_curve([&](const ImagePair&) { return (*cached)[next++ % cached->size()]; }, samples,
                           pr_thresholds, config.eval);
  }

  make_out_dir(config.out);
  eval::write_report_json(report, config.out / "eval_report.json");
  eval::write_per_image_csv(report, config.out / "per_image.csv");
  if (!pr_thresholds.empty()) eval::write_pr_csv(curve, config.out / "pr.csv");
  out << eval::summary_line(report.metrics) << '\n';
  return kOk;
}

int cmd_infer(const CliConfig& config, const fs::path& checkpoint, const fs::path& t0, const fs::path& t1,
              const fs::path& mask_path, std::ostream& out) {
  config.eval.validate();
  const net::ChangeModel<float> model = net::load_checkpoint<float>(checkpoint);
  ImagePair pair{io::read_rgb(t0), io::read_rgb(t1), t0.stem().string()};
  if (!pair.t0.same_shape(pair.t1))
    throw ShapeError("t0 is " + shape_string(pair.t0) + " but t1 is " + shape_string(pair.t1));

  const auto prob = eval::model_predictor(model, config.eval.symmetric)(pair);
  const auto regions = eval::predicted_regions(prob, config.eval);
  const ChangeMask mask = eval::regions_to_mask(regions, pair.t0.height, pair.t0.width);

  if (mask_path.has_parent_path()) make_out_dir(mask_path.parent_path());
  io::write_mask(mask_path, mask);
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& b = regions[i].bbox;
    list.push_back({{"id", i},
                    {"area", regions[i].area()},
                    {"bbox", {{"top", b.top}, {"left", b.left}, {"bottom", b.bottom}, {"right", b.right}}}});
  }
  fs::path regions_path = mask_path;
  regions_path.replace_filename(mask_path.stem().string() + "_regions.json");
  write_text(regions_path, nlohmann::ordered_json{{"height", pair.t0.height}, {"width", pair.t0.width}, {"regions", list}}.dump(2) + "\n");
  out << "regions: " << regions.size() << '\n' << "mask: " << mask_path.string() << '\n';
  return kOk;
}

int cmd_ablate(const CliConfig& base, const std::string& axis_name, const std::vector<std::string>& values,
               const fs::path& train_dataset, const fs::path& test_dataset, std::ostream& out) {
  const trainer::AblationAxis axis = trainer::ablation_axis_from_string(axis_name);
  CliConfig config = base;
  const auto train_set = training_samples(train_dataset);
  const auto test_set = labeled_samples(test_dataset);
  adopt_image_size(config, train_set);
  config.validate();
  for (const auto& v : values) trainer::apply_axis(config.train, axis, v);

  make_out_dir(config.out);
  const auto rows = trainer::run_ablation(axis, values, config.train, train_set, test_set, config.eval,
                                          [&out](const std::string& v, const trainer::TrainResult&) {
                                            out << "trained " << v << '\n' << std::flush;
                                          });
  trainer::write_ablation_csv(rows, config.out / "ablation.csv");
  out << "value,precision,recall,f1\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f\n", r.metrics.precision, r.metrics.recall, r.metrics.f1);
    out << r.value << buf;
  }
  return kOk;
}

int cmd_pr_plot(const std::vector<fs::path>& inputs, const fs::path& out_image, std::ostream& out) {
  if (inputs.empty()) throw ConfigError("pr-plot needs at least one points file");
  std::vector<LabeledCurve> curves;
  for (const auto& p : inputs) curves.push_back({p.stem().string(), eval::read_pr_csv(p)});
  if (out_image.has_parent_path()) make_out_dir(out_image.parent_path());
  write_pr_plot_svg(curves, out_image);
  for (const auto& c : curves) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " AUC=%.4f\n", eval::pr_auc(c.points));
    out << c.label << buf;
  }
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene change detection toolkit", "scd"};
  app.require_subcommand(1);
  Overrides o;

  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a labeled dataset");
  add_common(synth_cmd, o);
  synth_cmd->add_option("--count", o.count, "Number of samples")->required();
  synth_cmd->add_option("--split", o.split, "train | test");
  synth_cmd->add_option("--backgrounds", o.backgrounds, "Dataset of unchanged pairs to paste onto");
  synth_cmd->add_option("--cutouts", o.cutouts, "Directory of cutout PNGs");
  synth_cmd->add_option("--shadows", o.shadows, "Directory of shadow pattern PNGs");
  synth_cmd->add_option("--paste-rate", o.paste_rate, "Mean pasted objects per sample");
  synth_cmd->add_option("--shadow-prob", o.shadow_prob, "Per-branch shadow probability");
  synth_cmd->add_option("--severity", o.severity, "Photometric severity");
  synth_cmd->add_option("--scenes", o.scenes, "Procedural background count");
  synth_cmd->add_option("--height", o.height, "Image height");
  synth_cmd->add_option("--width", o.width, "Image width");

  std::string dataset, test_dataset, checkpoint, t0, t1, mask, axis, values, pr_list;
  bool no_pr = false;
  std::vector<std::string> plot_inputs;

  auto* train_cmd = app.add_subcommand("train", "Train a change model");
  add_common(train_cmd, o);
  add_train_flags(train_cmd, o);
  train_cmd->add_option("--dataset", dataset, "Training dataset directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Object-level evaluation of a checkpoint");
  add_common(eval_cmd, o);
  add_eval_flags(eval_cmd, o);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", dataset, "Labeled dataset directory")->required();
  eval_cmd->add_option("--pr-thresholds", pr_list, "Comma-separated PR sweep thresholds");
  eval_cmd->add_flag("--no-pr", no_pr, "Skip the PR sweep");

  auto* infer_cmd = app.add_subcommand("infer", "Predict a change mask for one image pair");
  add_common(infer_cmd, o);
  add_eval_flags(infer_cmd, o);
  infer_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("--t0", t0, "Image at time 0")->required();
  infer_cmd->add_option("--t1", t1, "Image at time 1")->required();
  infer_cmd->add_option("--mask", mask, "Output mask path (default <out>/mask.png)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate one model per axis value");
  add_common(ablate_cmd, o);
  add_train_flags(ablate_cmd, o);
  add_eval_flags(ablate_cmd, o);
  ablate_cmd->add_option("--axis", axis, "tap_layer | trainable_tail | loss_mode | shadow_aug")->required();
  ablate_cmd->add_option("--values", values, "Comma-separated values")->required();
  ablate_cmd->add_option("--dataset", dataset, "Training dataset directory")->required();
  ablate_cmd->add_option("--test-dataset", test_dataset, "Held-out dataset directory")->required();

  auto* plot_cmd = app.add_subcommand("pr-plot", "Overlay PR curves into an SVG");
  plot_cmd->add_option("inputs", plot_inputs, "PR point files (threshold,precision,recall)")->required();
  plot_cmd->add_option("--out", o.out, "Output image path")->required();

  std::vector<const char*> argv{"scd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (plot_cmd->parsed()) {
      std::vector<fs::path> inputs(plot_inputs.begin(), plot_inputs.end());
      return cmd_pr_plot(inputs, *o.out, out);
    }
    CliConfig config = merge(o);
    if (synth_cmd->parsed()) return cmd_synth(config, *o.count, out);
    if (train_cmd->parsed()) return cmd_train(config, dataset, out);
    if (eval_cmd->parsed()) {
      std::vector<double> thresholds;
      if (!no_pr) {
        if (pr_list.empty()) {
          thresholds = default_pr_thresholds();
        } else {
          for (const auto& s : split_list(pr_list)) {
            try {
              thresholds.push_back(std::stod(s));
            } catch (const std::exception&) {
              throw ConfigError("bad PR threshold '" + s + "'");
            }
          }
        }
      }
      return cmd_eval(config, checkpoint, dataset, thresholds, out);
    }
    if (infer_cmd->parsed()) return cmd_infer(config, checkpoint, t0, t1, mask.empty() ? config.out / "mask.png" : fs::path(mask), out);
    if (ablate_cmd->parsed()) return cmd_ablate(config, axis, split_list(values), dataset, test_dataset, out);
  } catch (...) {
    return report_exception(err);
  }
  return kUsage;
}

} // namespace scd::cli
