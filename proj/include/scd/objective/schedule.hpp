// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "scd/core/error.hpp"

namespace scd::objective {

struct PolySchedule {
  double base_lr = 0.001;
  double power = 0.9;
  long max_iter = 1;

  void validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (!(power > 0.0)) throw ConfigError("poly power must be > 0");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  }
};

/// base_lr * (1 - iter / max_iter)^power
inline double poly_lr(const PolySchedule& schedule, long iter) {
  if (iter < 0 || iter > schedule.max_iter)
    throw ConfigError("poly_lr: iter " + std::to_string(iter) + " outside [0, " + std::to_string(schedule.max_iter) + "]");
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(schedule.max_iter);
  return schedule.base_lr * std::pow(frac, schedule.power);
}

} // namespace scd::objective
