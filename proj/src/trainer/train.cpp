// SPDX-License-Identifier: Apache-2.0

#include "scd/trainer/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <utility>

#include "scd/core/hash.hpp"
#include "scd/synthlab/procedural.hpp"

namespace scd::trainer {
namespace {

// Salts keep the asset banks, batch draws and model init on separate streams.
constexpr std::uint64_t kCutoutSalt = 0xC0770u;
constexpr std::uint64_t kShadowSalt = 0x5AD0u;
constexpr std::uint64_t kBatchSalt = 0xBA7Cu;
constexpr std::uint64_t kInitSalt = 0x1417u;

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

} // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  backbone.validate();
  const int s = backbone.tap_stride();
  if (height < 1 || width < 1 || height % s != 0 || width % s != 0)
    throw ConfigError("image size " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by the tap stride " + std::to_string(s));
  if (trainable_tail_k > backbone.tap_layer)
    throw ConfigError("trainable_tail_k exceeds tap_layer " + std::to_string(backbone.tap_layer));
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
  effective_schedule().validate();
  loss.validate();
  synth.validate();
  if (on_the_fly_augmentation) {
    if (cutout_min_size < 2 || cutout_max_size < cutout_min_size || cutout_max_size > std::min(height, width))
      throw ConfigError("cutout size range must fit inside the training image");
    if (cutout_bank_size < 1 || shadow_bank_size < 1) throw ConfigError("asset bank sizes must be >= 1");
    if (!(distractor_rate >= 0.0)) throw ConfigError("distractor_rate must be >= 0");
    if (!(resynthesis_probability >= 0.0 && resynthesis_probability <= 1.0))
      throw ConfigError("resynthesis_probability must lie in [0,1]");
  }
}

objective::PolySchedule TrainConfig::effective_schedule() const {
  objective::PolySchedule s = schedule;
  s.max_iter = std::max<long>(1, max_iter);
  return s;
}

Model make_model(const TrainConfig& config) {
  config.validate();
  Model model = Model::create(config.backbone, config.weight_tying, derive_seed(config.rng_seed, kInitSalt),
                              config.decoder_widths);
  model.set_trainable_tail(config.trainable_tail_k < 0 ? config.backbone.tap_layer : config.trainable_tail_k);
  return model;
}

AugmentationAssets make_assets(const TrainConfig& config, int height, int width) {
  AugmentationAssets assets;
  assets.cutouts = synth::cutout_bank(derive_seed(config.rng_seed, kCutoutSalt), config.cutout_bank_size,
                                      config.cutout_min_size, config.cutout_max_size);
  assets.shadows = synth::shadow_bank(derive_seed(config.rng_seed, kShadowSalt), config.shadow_bank_size, height, width);
  return assets;
}

TrainResult train(Model model, const std::vector<LabeledSample>& dataset, const TrainConfig& config) {
  config.validate();
  TrainResult result{std::move(model), {}};
  if (config.max_iter == 0) return result;
  if (dataset.empty()) throw ConfigError("training dataset is empty");

  const int H = dataset.front().pair.t0.height;
  const int W = dataset.front().pair.t0.width;
  for (const auto& s : dataset) {
    validate(s);
    if (!s.has_mask()) throw ConfigError("training sample '" + s.pair.scene_id + "' has no mask");
    if (s.pair.t0.height != H || s.pair.t0.width != W)
      throw ConfigError("training samples must share one image size");
  }
  const int stride = result.model.spec().tap_stride();
  if (H % stride != 0 || W % stride != 0)
    throw ConfigError("training images are not divisible by the tap stride " + std::to_string(stride));
  if (config.trainable_tail_k >= 0) result.model.set_trainable_tail(config.trainable_tail_k);

  const AugmentationAssets assets = config.on_the_fly_augmentation ? make_assets(config, H, W) : AugmentationAssets{};
  const objective::PolySchedule schedule = config.effective_schedule();
  const int threads = config.threads > 0 ? config.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::size_t B = static_cast<std::size_t>(config.batch_size);

  Model& net = result.model;
  AdamState<float> adam = adam_init(net);
  std::vector<LabeledSample> batch(B);
  std::vector<std::size_t> batch_ids(B);
  std::vector<ChangeMask> targets(B);
  std::vector<Plane<float>> logits(B);
  std::vector<net::ForwardTrace<float>> traces(B);
  std::vector<net::Gradients<float>> sample_grads(B);

  for (long iter = 0; iter < config.max_iter; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t iter_seed = derive_seed(config.rng_seed ^ kBatchSalt, static_cast<std::uint64_t>(iter));
    synth::Rng rng(iter_seed);
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    for (std::size_t b = 0; b < B; ++b) batch_ids[b] = pick(rng);

    parallel_for(B, threads, [&](std::size_t b) {
      const LabeledSample& base = dataset[batch_ids[b]];
      if (config.on_the_fly_augmentation) {
        synth::Rng sample_rng(derive_seed(iter_seed, b));
        const int distractors = synth::draw_paste_count(config.distractor_rate, sample_rng);
        const LabeledSample staged = synth::paste_distractors(base, assets.cutouts, distractors, sample_rng);
        const bool resynthesize = std::uniform_real_distribution<double>(0.0, 1.0)(sample_rng) < config.resynthesis_probability;
        batch[b] = resynthesize
                       ? synth::synthesize_sample(staged, assets.cutouts, assets.shadows, config.synth, sample_rng)
                       : staged;
        if (config.branch_swap && std::uniform_int_distribution<int>(0, 1)(sample_rng) == 1)
          std::swap(batch[b].pair.t0, batch[b].pair.t1);
      } else {
        batch[b] = base;
      }
      targets[b] = batch[b].mask;
      logits[b] = net.forward_train(batch[b].pair, traces[b]);
    });

    const auto loss = objective::seg_loss_batch<float>(targets, logits, config.loss);
    if (!std::isfinite(loss.terms.total))
      throw NumericalError("non-finite loss at iteration " + std::to_string(iter), iter, batch_ids);

    parallel_for(B, threads, [&](std::size_t b) {
      sample_grads[b] = net.zero_gradients();
      net.backward(traces[b], loss.grads[b], sample_grads[b]);
    });
    // Fixed summation order keeps the update independent of the thread count.
    net::Gradients<float>& total = sample_grads[0];
    for (std::size_t b = 1; b < B; ++b)
      for (std::size_t p = 0; p < total.size(); ++p) {
        total[p].weight += sample_grads[b][p].weight;
        total[p].bias += sample_grads[b][p].bias;
      }

    const double lr = objective::poly_lr(schedule, iter);
    adam_step(net, total, adam, lr, config.adam);

    TrainRecord rec;
    rec.iter = iter;
    rec.lr = lr;
    rec.loss_total = loss.terms.total;
    rec.loss_bce = loss.terms.bce;
    rec.loss_dice = loss.terms.dice;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.records.push_back(rec);
    if (config.on_iteration) config.on_iteration(rec);
  }
  return result;
}

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : log.records) {
    nlohmann::json j = {{"iter", r.iter},         {"lr", r.lr},
                        {"loss_total", r.loss_total}, {"loss_bce", r.loss_bce},
                        {"loss_dice", r.loss_dice},   {"wall_ms", r.wall_ms}};
    out << j.dump() << '\n';
  }
  if (!log.checkpoint_path.empty()) out << nlohmann::json{{"checkpoint", log.checkpoint_path}}.dump() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

} // namespace scd::trainer
