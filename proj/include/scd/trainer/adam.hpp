// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "scd/net/model.hpp"

namespace scd::trainer {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  net::Gradients<Scalar> m;
  net::Gradients<Scalar> v;
  long step = 0;
};

template <typename Scalar>
AdamState<Scalar> adam_init(const net::ChangeModel<Scalar>& model) {
  return {model.zero_gradients(), model.zero_gradients(), 0};
}

/// One bias-corrected Adam update of the trainable parameters. Frozen
/// parameters and their moments are left untouched.
template <typename Scalar>
void adam_step(net::ChangeModel<Scalar>& model, const net::Gradients<Scalar>& grads, AdamState<Scalar>& state,
               double lr, const AdamConfig& cfg = {}) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar step_size = static_cast<Scalar>(lr / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  const Scalar eps = static_cast<Scalar>(cfg.eps);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  };

  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;
    update(params[i]->weight, grads[i].weight, state.m[i].weight, state.v[i].weight);
    update(params[i]->bias, grads[i].bias, state.m[i].bias, state.v[i].bias);
  }
}

} // namespace scd::trainer
