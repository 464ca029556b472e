#pragma once

#include <span>

#include "cmlid/tensor.hpp"

namespace cmlid {

enum class OptimizerKind { Adam, SgdDecay };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr0 = 0.001;
  double decay = 0.0;
  double l2_lambda = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig adam_defaults();
  // lr0 0.015, decay 0.05, lambda 1e-8.
  static OptimizerConfig sgd_decay_defaults();

  // Throws std::invalid_argument on lr0 <= 0, decay < 0 or lambda < 0.
  void validate() const;
};

// Bias-corrected Adam. step is 1-based. L2 (if any) is added to the gradient.
void adam_step(std::span<Parameter* const> params, const OptimizerConfig& config, long step);

// lr0 / (1 + decay * epoch)
double sgd_learning_rate(const OptimizerConfig& config, long epoch);

// theta <- theta - lr(epoch) * (grad + lambda * theta)
void sgd_decay_step(std::span<Parameter* const> params, const OptimizerConfig& config,
                    long epoch);

void zero_grads(std::span<Parameter* const> params);

}  // namespace cmlid
