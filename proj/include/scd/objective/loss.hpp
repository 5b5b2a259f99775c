// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scd/core/types.hpp"

namespace scd::objective {

enum class LossMode { bce, dice, bce_plus_dice };

/// How the Dice term is reduced over a batch: one Dice per image then the
/// mean, or one Dice over the pooled pixels of the whole batch.
enum class DiceReduction { per_image, batch };

struct LossConfig {
  double epsilon = 1e-6;
  double clamp_eps = 1e-7;
  LossMode mode = LossMode::bce_plus_dice;
  DiceReduction dice_reduction = DiceReduction::per_image;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("loss epsilon must be > 0");
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ConfigError("clamp_eps must lie in (0, 0.5)");
  }
};

std::string_view to_string(LossMode mode);
LossMode loss_mode_from_string(std::string_view s);

/// Loss value with its two terms; `total` follows the configured mode.
struct LossTerms {
  double total = 0.0;
  double bce = 0.0;
  double dice = 0.0;
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-z).exp()).inverse();
}

/// Mean binary cross-entropy; predictions are clamped to
/// [clamp_eps, 1 - clamp_eps] before the logs.
template <typename DerivedT, typename DerivedP>
double bce_loss(const Eigen::ArrayBase<DerivedT>& p_true, const Eigen::ArrayBase<DerivedP>& p_pred,
                double clamp_eps = 1e-7) {
  if (p_true.rows() != p_pred.rows() || p_true.cols() != p_pred.cols())
    throw ShapeError("bce_loss: target and prediction dims differ");
  const auto t = p_true.template cast<double>();
  const auto p = p_pred.template cast<double>().max(clamp_eps).min(1.0 - clamp_eps);
  const double n = static_cast<double>(p_true.size());
  return -(t * p.log() + (1.0 - t) * (1.0 - p).log()).sum() / n;
}

/// 2 - 2*sum(t*p) / (sum(t^2) + sum(p^2) + eps). A perfect prediction gives
/// ~1 and two empty masks give 2; the constant offset leaves gradients alone.
template <typename DerivedT, typename DerivedP>
double dice_loss(const Eigen::ArrayBase<DerivedT>& p_true, const Eigen::ArrayBase<DerivedP>& p_pred,
                 double epsilon = 1e-6) {
  if (p_true.rows() != p_pred.rows() || p_true.cols() != p_pred.cols())
    throw ShapeError("dice_loss: target and prediction dims differ");
  const auto t = p_true.template cast<double>();
  const auto p = p_pred.template cast<double>();
  return 2.0 - 2.0 * (t * p).sum() / (t.square().sum() + p.square().sum() + epsilon);
}

template <typename DerivedT, typename DerivedP>
LossTerms seg_loss_terms(const Eigen::ArrayBase<DerivedT>& p_true, const Eigen::ArrayBase<DerivedP>& p_pred,
                         const LossConfig& config) {
  LossTerms terms;
  terms.bce = bce_loss(p_true, p_pred, config.clamp_eps);
  terms.dice = dice_loss(p_true, p_pred, config.epsilon);
  switch (config.mode) {
    case LossMode::bce: terms.total = terms.bce; break;
    case LossMode::dice: terms.total = terms.dice; break;
    case LossMode::bce_plus_dice: terms.total = terms.bce + terms.dice; break;
  }
  return terms;
}

template <typename DerivedT, typename DerivedP>
double seg_loss(const Eigen::ArrayBase<DerivedT>& p_true, const Eigen::ArrayBase<DerivedP>& p_pred,
                const LossConfig& config) {
  switch (config.mode) {
    case LossMode::bce: return bce_loss(p_true, p_pred, config.clamp_eps);
    case LossMode::dice: return dice_loss(p_true, p_pred, config.epsilon);
    case LossMode::bce_plus_dice:
      return bce_loss(p_true, p_pred, config.clamp_eps) + dice_loss(p_true, p_pred, config.epsilon);
  }
  return 0.0;
}

/// d seg_loss(t, sigmoid(z)) / dz. Uses the unclamped logistic, so the BCE
/// part is (p - t) / N everywhere.
template <typename DerivedT, typename DerivedZ>
Plane<typename DerivedZ::Scalar> seg_loss_grad(const Eigen::ArrayBase<DerivedT>& p_true,
                                               const Eigen::ArrayBase<DerivedZ>& logits, const LossConfig& config) {
  using Scalar = typename DerivedZ::Scalar;
  if (p_true.rows() != logits.rows() || p_true.cols() != logits.cols())
    throw ShapeError("seg_loss_grad: target and logits dims differ");
  const Plane<double> t = p_true.template cast<double>();
  const Plane<double> p = sigmoid(logits.template cast<double>());
  const double n = static_cast<double>(t.size());

  Plane<double> grad = Plane<double>::Zero(t.rows(), t.cols());
  if (config.mode != LossMode::dice) grad += (p - t) / n;
  if (config.mode != LossMode::bce) {
    const double inter = (t * p).sum();
    const double denom = t.square().sum() + p.square().sum() + config.epsilon;
    const Plane<double> dloss_dp = (4.0 * inter * p - 2.0 * t * denom) / (denom * denom);
    grad += dloss_dp * p * (1.0 - p);
  }
  return grad.template cast<Scalar>();
}

/// Batch loss and per-image logit gradients. BCE is a mean over all pixels
/// of the batch; Dice follows config.dice_reduction.
template <typename Scalar>
struct BatchLoss {
  LossTerms terms;
  std::vector<Plane<Scalar>> grads;
};

template <typename Scalar>
BatchLoss<Scalar> seg_loss_batch(std::span<const ChangeMask> targets, std::span<const Plane<Scalar>> logits,
                                 const LossConfig& config) {
  if (targets.size() != logits.size() || targets.empty())
    throw ShapeError("seg_loss_batch: need one target per prediction");
  const double b = static_cast<double>(targets.size());
  BatchLoss<Scalar> out;
  out.grads.reserve(targets.size());

  if (config.dice_reduction == DiceReduction::per_image) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const Plane<Scalar> prob = sigmoid(logits[i]);
      const LossTerms t = seg_loss_terms(targets[i], prob, config);
      out.terms.total += t.total / b;
      out.terms.bce += t.bce / b;
      out.terms.dice += t.dice / b;
      out.grads.push_back(seg_loss_grad(targets[i], logits[i], config) / Scalar(b));
    }
    return out;
  }

  // Pooled Dice: the sums run over every pixel of every image.
  double inter = 0.0, denom = config.epsilon, bce = 0.0, pixels = 0.0;
  std::vector<Plane<double>> probs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].rows() != logits[i].rows() || targets[i].cols() != logits[i].cols())
      throw ShapeError("seg_loss_batch: target and logits dims differ");
    const Plane<double> t = targets[i].template cast<double>();
    Plane<double> p = sigmoid(logits[i].template cast<double>());
    inter += (t * p).sum();
    denom += t.square().sum() + p.square().sum();
    bce += bce_loss(t, p, config.clamp_eps) * static_cast<double>(t.size());
    pixels += static_cast<double>(t.size());
    probs.push_back(std::move(p));
  }
  out.terms.bce = bce / pixels;
  out.terms.dice = 2.0 - 2.0 * inter / denom;
  out.terms.total = config.mode == LossMode::bce    ? out.terms.bce
                    : config.mode == LossMode::dice ? out.terms.dice
                                                    : out.terms.bce + out.terms.dice;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Plane<double> t = targets[i].template cast<double>();
    const Plane<double>& p = probs[i];
    Plane<double> g = Plane<double>::Zero(t.rows(), t.cols());
    if (config.mode != LossMode::dice) g += (p - t) / pixels;
    if (config.mode != LossMode::bce) g += (4.0 * inter * p - 2.0 * t * denom) / (denom * denom) * p * (1.0 - p);
    out.grads.push_back(g.template cast<Scalar>());
  }
  return out;
}

inline std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::bce: return "bce";
    case LossMode::dice: return "dice";
    case LossMode::bce_plus_dice: return "bce+dice";
  }
  return "?";
}

inline LossMode loss_mode_from_string(std::string_view s) {
  if (s == "bce") return LossMode::bce;
  if (s == "dice") return LossMode::dice;
  if (s == "bce+dice" || s == "bce_plus_dice") return LossMode::bce_plus_dice;
  throw ConfigError("unknown loss mode '" + std::string(s) + "' (expected bce, dice or bce+dice)");
}

} // namespace scd::objective
