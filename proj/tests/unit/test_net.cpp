// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scd/net/checkpoint.hpp"
#include "scd/net/model.hpp"
#include "scd/objective/loss.hpp"
#include "scratch_dir.hpp"

using namespace scd;
using namespace scd::net;

namespace {

ImagePair random_pair(std::uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  return {testing::random_raster(rng, 3, h, w), testing::random_raster(rng, 3, h, w), "p"};
}

} // namespace

TEST_CASE("col2im is the adjoint of im2col") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int stride : {1, 2})
    for (int kernel : {1, 3, 5})
      for (auto [h, w] : {std::pair{7, 9}, std::pair{8, 8}}) {
        Tensor<double> x(2, h, w);
        for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = n(rng);
        const Matrix<double> cx = im2col(x, kernel, stride);
        Matrix<double> y(cx.rows(), cx.cols());
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);
        const double lhs = (cx.array() * y.array()).sum();
        const double rhs = (col2im(y, 2, h, w, kernel, stride).data.array() * x.data.array()).sum();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      }
}

TEST_CASE("im2col matches direct indexing") {
  std::mt19937_64 rng(2);
  Tensor<float> x(2, 5, 6);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = static_cast<float>(i);
  for (int stride : {1, 2}) {
    const Matrix<float> col = im2col(x, 3, stride);
    const int ho = conv_out_size(5, 3, stride), wo = conv_out_size(6, 3, stride);
    for (int c = 0; c < 2; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              const int iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
              const float expect = (iy >= 0 && iy < 5 && ix >= 0 && ix < 6) ? x(c, iy, ix) : 0.f;
              CHECK(col((c * 3 + ky) * 3 + kx, oy * wo + ox) == expect);
            }
  }
}

TEST_CASE("tiny backbone arithmetic") {
  const BackboneSpec spec = BackboneSpec::tiny();
  CHECK(spec.total_layers() == 8);
  CHECK(spec.tap_stride() == 16);
  CHECK(spec.tap_channels() == 128);
  CHECK(BackboneSpec::tiny(4).tap_stride() == 4);
  CHECK(BackboneSpec::tiny(3).tap_stride() == 2);
  BackboneSpec bad = BackboneSpec::tiny();
  bad.tap_layer = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("feature and mask shapes follow the tap stride") {
  const auto model = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::untied, 1);
  const ImagePair pair = random_pair(3, 256, 512);
  const auto fa = model.extract_features(pair.t0, EncoderBranch::a);
  CHECK(fa.values.height == 16);
  CHECK(fa.values.width == 32);
  CHECK(fa.values.channels() == 128);
  const auto fused = fuse(fa, model.extract_features(pair.t1, EncoderBranch::b));
  CHECK(fused.values.channels() == 256);
  const auto prob = model.decode(fused);
  CHECK(prob.rows() == 256);
  CHECK(prob.cols() == 512);
  CHECK(prob.minCoeff() > 0.f);
  CHECK(prob.maxCoeff() < 1.f);
  CHECK_THROWS_AS(model.extract_features(Raster(3, 100, 64), EncoderBranch::a), ShapeError);
}

TEST_CASE("fuse places halves and rejects spatial mismatch") {
  FeatureTensor<float> x{Tensor<float>(2, 3, 4), 16};
  x.values.data.setConstant(1.5f);
  FeatureTensor<float> zeros{Tensor<float>(2, 3, 4), 16};
  const auto f = fuse(x, zeros);
  CHECK(f.values.data.topRows(2) == x.values.data);
  CHECK(f.values.data.bottomRows(2).isZero());
  FeatureTensor<float> other{Tensor<float>(2, 3, 5), 16};
  CHECK_THROWS_AS(fuse(x, other), ShapeError);
}

TEST_CASE("forward is deterministic and tied branches agree") {
  const auto tied = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::tied, 2);
  CHECK(tied.encoders_shared());
  const ImagePair pair = random_pair(4, 32, 64);
  const auto a = tied.extract_features(pair.t0, EncoderBranch::a);
  const auto b = tied.extract_features(pair.t0, EncoderBranch::b);
  CHECK(a.values == b.values);
  CHECK((tied.forward(pair) == tied.forward(pair)).all());

  const ImagePair same{pair.t0, pair.t0, "same"};
  CHECK(tied.forward(same).isFinite().all());
}

TEST_CASE("decoder rejects non power-of-two strides") {
  const auto model = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::untied, 1);
  FeatureTensor<float> f{Tensor<float>(256, 2, 2), 12};
  CHECK_THROWS_AS(model.decode(f), ConfigError);
}

TEST_CASE("copying a tied model keeps the encoders shared") {
  const auto tied = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::tied, 2);
  const ChangeModel<float> copy = tied;
  CHECK(copy.encoders_shared());
  CHECK(&copy.encoder(EncoderBranch::a) != &tied.encoder(EncoderBranch::a));
}

TEST_CASE("backward matches finite differences of the loss") {
  auto model = ChangeModel<double>::create(BackboneSpec::tiny(4), WeightTying::untied, 9, {6, 4});
  const ImagePair pair = random_pair(10, 8, 8);
  std::mt19937_64 rng(11);
  const ChangeMask target = testing::random_blob_mask(rng, 8, 8, 2);
  objective::LossConfig cfg;

  auto loss_of = [&](const ChangeModel<double>& m) {
    ForwardTrace<double> tr;
    const Plane<double> logits = m.forward_train(pair, tr);
    return objective::seg_loss(target, objective::sigmoid(logits).eval(), cfg);
  };

  ForwardTrace<double> trace;
  const Plane<double> logits = model.forward_train(pair, trace);
  auto grads = model.zero_gradients();
  model.backward(trace, objective::seg_loss_grad(target, logits, cfg), grads);

  const auto params = model.parameters();
  const double h = 1e-5;
  std::mt19937_64 pick(12);
  for (std::size_t slot = 0; slot < params.size(); ++slot) {
    for (int trial = 0; trial < 3; ++trial) {
      auto& w = params[slot]->weight;
      const Eigen::Index idx = std::uniform_int_distribution<Eigen::Index>(0, w.size() - 1)(pick);
      const double keep = w.data()[idx];
      w.data()[idx] = keep + h;
      const double up = loss_of(model);
      w.data()[idx] = keep - h;
      const double down = loss_of(model);
      w.data()[idx] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grads[slot].weight.data()[idx];
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    const double keep = params[slot]->bias(0);
    params[slot]->bias(0) = keep + h;
    const double up = loss_of(model);
    params[slot]->bias(0) = keep - h;
    const double down = loss_of(model);
    params[slot]->bias(0) = keep;
    CHECK(std::abs((up - down) / (2 * h) - grads[slot].bias(0)) <= 1e-5);
  }
}

TEST_CASE("trainable tail controls which encoder layers get gradients") {
  auto model = ChangeModel<double>::create(BackboneSpec::tiny(), WeightTying::untied, 3, {8, 8, 8, 8});
  CHECK_THROWS_AS(model.set_trainable_tail(9), ConfigError);
  CHECK_THROWS_AS(model.set_trainable_tail(-1), ConfigError);
  model.set_trainable_tail(3);
  const ImagePair pair = random_pair(5, 32, 32);
  std::mt19937_64 rng(6);
  ChangeMask target = ChangeMask::Zero(32, 32);
  target.block(4, 4, 12, 12) = 1;
  ForwardTrace<double> trace;
  const Plane<double> logits = model.forward_train(pair, trace);
  auto grads = model.zero_gradients();
  model.backward(trace, objective::seg_loss_grad(target, logits, objective::LossConfig{}), grads);
  for (int i = 0; i < 8; ++i) {
    const bool nonzero = !grads[static_cast<std::size_t>(i)].weight.isZero(0.0);
    CHECK(nonzero == (i >= 5));
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  testing::ScratchDir dir("ckpt");
  auto model = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::tied, 7);
  model.set_trainable_tail(2);
  save_checkpoint(model, dir / "m.ckpt");
  const auto back = load_checkpoint<float>(dir / "m.ckpt");
  CHECK(back.encoders_shared());
  CHECK(back.trainable_tail_k() == 2);
  CHECK(parameter_hash(back) == parameter_hash(model));
  const ImagePair pair = random_pair(1, 32, 32);
  CHECK((back.forward(pair) == model.forward(pair)).all());
}

TEST_CASE("damaged checkpoints raise load errors") {
  testing::ScratchDir dir("ckpt_bad");
  save_checkpoint(ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::untied, 7), dir / "m.ckpt");
  const auto size = std::filesystem::file_size(dir / "m.ckpt");
  std::filesystem::copy_file(dir / "m.ckpt", dir / "t.ckpt");
  std::filesystem::resize_file(dir / "t.ckpt", size / 2);
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "t.ckpt"), LoadError);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "junk.ckpt"), LoadError);
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "absent.ckpt"), LoadError);
}

TEST_CASE("pretrained import overwrites named encoder layers") {
  testing::ScratchDir dir("import");
  auto model = ChangeModel<float>::create(BackboneSpec::tiny(), WeightTying::untied, 7);
  const auto& first = model.encoder(EncoderBranch::a).layers.front();
  std::vector<float> w(static_cast<std::size_t>(first.weight.size()), 0.25f);
  std::vector<float> b(static_cast<std::size_t>(first.bias.size()), -1.f);
  std::ofstream(dir / "w.bin", std::ios::binary).write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * 4));
  std::ofstream(dir / "b.bin", std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * 4));
  nlohmann::json manifest = {{"format_version", 1},
                             {"layers", {{{"name", first.name}, {"weight", "w.bin"}, {"bias", "b.bin"}}}}};
  std::ofstream(dir / "weights.json") << manifest.dump();
  CHECK(import_pretrained(model, dir / "weights.json") == 1);
  for (auto br : {EncoderBranch::a, EncoderBranch::b}) {
    CHECK((model.encoder(br).layers.front().weight.array() == 0.25f).all());
    CHECK((model.encoder(br).layers.front().bias.array() == -1.f).all());
  }
}
