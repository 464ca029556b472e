#include "cmlid/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cmlid {

OptimizerConfig OptimizerConfig::adam_defaults() { return OptimizerConfig{}; }

OptimizerConfig OptimizerConfig::sgd_decay_defaults() {
  OptimizerConfig c;
  c.kind = OptimizerKind::SgdDecay;
  c.lr0 = 0.015;
  c.decay = 0.05;
  c.l2_lambda = 1e-8;
  return c;
}

void OptimizerConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("optimizer lr0 must be positive");
  if (!(decay >= 0.0)) throw std::invalid_argument("optimizer decay must be non-negative");
  if (!(l2_lambda >= 0.0)) throw std::invalid_argument("optimizer l2 lambda must be non-negative");
  if (kind == OptimizerKind::Adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam betas must be in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  }
}

void adam_step(std::span<Parameter* const> params, const OptimizerConfig& config, long step) {
  if (step < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (Parameter* p : params) {
    if (p->first_moment.shape() != p->value.shape()) {
      p->first_moment = Tensor(p->value.shape());
      p->second_moment = Tensor(p->value.shape());
    }
    auto value = p->value.data();
    auto grad = p->grad.data();
    auto m = p->first_moment.data();
    auto v = p->second_moment.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + config.l2_lambda * value[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config.lr0 * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double sgd_learning_rate(const OptimizerConfig& config, long epoch) {
  return config.lr0 / (1.0 + config.decay * static_cast<double>(epoch));
}

void sgd_decay_step(std::span<Parameter* const> params, const OptimizerConfig& config,
                    long epoch) {
  const double lr = sgd_learning_rate(config, epoch);
  for (Parameter* p : params) {
    auto value = p->value.data();
    auto grad = p->grad.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      value[i] -= lr * (grad[i] + config.l2_lambda * value[i]);
    }
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace cmlid
