// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "scd/objective/loss.hpp"
#include "scd/objective/schedule.hpp"

using namespace scd;
using namespace scd::objective;
using doctest::Approx;

namespace {

Plane<double> row(std::initializer_list<double> v) {
  Plane<double> p(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(0, i++) = x;
  return p;
}

} // namespace

TEST_CASE("bce worked examples") {
  CHECK(bce_loss(row({1, 0}), row({0.5, 0.5})) == Approx(0.693147).epsilon(1e-6));
  CHECK(bce_loss(row({1, 0}), row({0.9, 0.2})) == Approx(0.164252).epsilon(1e-6));
  CHECK(bce_loss(row({1}), row({1.0 - 1e-7})) == Approx(1e-7).epsilon(1e-3));
  CHECK(std::isfinite(bce_loss(row({1, 0}), row({0.0, 1.0}))));
  CHECK_THROWS_AS(bce_loss(row({1, 0}), row({0.5})), ShapeError);
}

TEST_CASE("dice worked examples keep the constant offset") {
  CHECK(dice_loss(row({1, 1, 1, 1}), row({1, 1, 1, 1})) == Approx(1.0).epsilon(1e-6));
  CHECK(dice_loss(row({1, 1, 1, 1}), row({0, 0, 0, 0})) == Approx(2.0));
  CHECK(dice_loss(row({1, 0, 0, 0}), row({0.5, 0.5, 0, 0})) == Approx(1.333333).epsilon(1e-6));
  CHECK(dice_loss(row({0, 0}), row({0, 0})) == Approx(2.0));
}

TEST_CASE("seg_loss combines the single-mode calls") {
  const auto t = row({1, 0});
  const auto p = row({0.5, 0.5});
  LossConfig cfg;
  const double b = bce_loss(t, p), d = dice_loss(t, p);
  cfg.mode = LossMode::bce;
  CHECK(seg_loss(t, p, cfg) == b);
  cfg.mode = LossMode::dice;
  CHECK(seg_loss(t, p, cfg) == d);
  cfg.mode = LossMode::bce_plus_dice;
  CHECK(seg_loss(t, p, cfg) == Approx(b + d).epsilon(1e-15));
  const LossTerms terms = seg_loss_terms(t, p, cfg);
  CHECK(terms.total == Approx(terms.bce + terms.dice));
}

TEST_CASE("vectorized losses match the scalar loop oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = dim(rng), w = dim(rng);
    ChangeMask t(h, w);
    Plane<double> p(h, w);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t(i) = u(rng) < 0.3 ? 1 : 0;
      p(i) = u(rng);
    }
    const auto tv = testing::flatten(t);
    const auto pv = testing::flatten(p);
    CHECK(std::abs(bce_loss(t, p) - testing::bce_oracle(tv, pv)) < 1e-9);
    CHECK(std::abs(dice_loss(t, p) - testing::dice_oracle(tv, pv)) < 1e-9);
  }
}

TEST_CASE("logit gradient matches finite differences in every mode") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 2.0);
  std::bernoulli_distribution coin(0.4);
  for (LossMode mode : {LossMode::bce, LossMode::dice, LossMode::bce_plus_dice}) {
    LossConfig cfg;
    cfg.mode = mode;
    Plane<double> logits(6, 6);
    ChangeMask t(6, 6);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      logits(i) = z(rng);
      t(i) = coin(rng) ? 1 : 0;
    }
    const Plane<double> g = seg_loss_grad(t, logits, cfg);
    const Plane<double> fd = testing::finite_difference(
        [&](const Plane<double>& l) { return seg_loss(t, sigmoid(l).eval(), cfg); }, logits, 1e-5);
    CHECK((g - fd).abs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("saturated correct pixel has a vanishing negative BCE gradient") {
  LossConfig cfg;
  cfg.mode = LossMode::bce;
  ChangeMask t(1, 1);
  t(0, 0) = 1;
  Plane<double> z(1, 1);
  z(0, 0) = 20.0;
  const double g = seg_loss_grad(t, z, cfg)(0, 0);
  CHECK(g < 0.0);
  CHECK(g > -1e-8);
}

TEST_CASE("per-image batch loss is the mean of single-image losses") {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> z(0.f, 1.f);
  std::vector<ChangeMask> ts;
  std::vector<Plane<float>> ls;
  for (int i = 0; i < 3; ++i) {
    ts.push_back(testing::random_blob_mask(rng, 8, 8, 2));
    Plane<float> l(8, 8);
    for (Eigen::Index k = 0; k < l.size(); ++k) l(k) = z(rng);
    ls.push_back(l);
  }
  LossConfig cfg;
  const BatchLoss<float> b = seg_loss_batch<float>(ts, ls, cfg);
  double mean = 0.0;
  for (int i = 0; i < 3; ++i) mean += seg_loss(ts[i], sigmoid(ls[i]).eval(), cfg) / 3.0;
  CHECK(b.terms.total == Approx(mean).epsilon(1e-6));
  CHECK(b.grads.size() == 3);
}

TEST_CASE("pooled batch gradient matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 1.5);
  std::vector<ChangeMask> ts{testing::random_blob_mask(rng, 5, 5, 2), testing::random_blob_mask(rng, 5, 5, 2)};
  std::vector<Plane<double>> ls(2, Plane<double>(5, 5));
  for (auto& l : ls)
    for (Eigen::Index k = 0; k < l.size(); ++k) l(k) = z(rng);
  LossConfig cfg;
  cfg.dice_reduction = DiceReduction::batch;
  const BatchLoss<double> b = seg_loss_batch<double>(ts, ls, cfg);
  for (std::size_t img = 0; img < 2; ++img) {
    const Plane<double> fd = testing::finite_difference(
        [&](const Plane<double>& l) {
          auto copy = ls;
          copy[img] = l;
          return seg_loss_batch<double>(ts, copy, cfg).terms.total;
        },
        ls[img], 1e-5);
    CHECK((b.grads[img] - fd).abs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("loss config parsing and validation") {
  CHECK(loss_mode_from_string("bce+dice") == LossMode::bce_plus_dice);
  CHECK(loss_mode_from_string("dice") == LossMode::dice);
  CHECK_THROWS_AS(loss_mode_from_string("focal"), ConfigError);
  LossConfig cfg;
  cfg.epsilon = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("poly schedule") {
  PolySchedule s{0.001, 0.9, 2000};
  CHECK(poly_lr(s, 0) == 0.001);
  CHECK(poly_lr(s, 2000) == 0.0);
  CHECK(std::abs(poly_lr(s, 1000) - 5.35887e-4) < 1e-9);
  CHECK_THROWS_AS(poly_lr(s, 2001), ConfigError);
  CHECK_THROWS_AS(poly_lr(s, -1), ConfigError);
  double prev = 1.0;
  for (long i = 0; i <= 2000; i += 50) {
    CHECK(poly_lr(s, i) <= prev);
    prev = poly_lr(s, i);
  }
}
