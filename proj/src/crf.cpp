#include "cmlid/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cmlid::crf {

namespace {

void validate(const Tensor& emissions, const Tensor& transitions) {
  require_rank(emissions, 2, "crf emissions");
  const std::size_t labels = emissions.dim(1);
  if (emissions.dim(0) == 0) throw ShapeError("crf: emissions need at least one position");
  if (labels == 0) throw ShapeError("crf: emissions need at least one label");
  require_shape(transitions, {labels + 2, labels + 2}, "crf transitions");
  if (!emissions.all_finite() || !transitions.all_finite()) {
    throw std::domain_error("crf: non-finite emission or transition score");
  }
}

double log_sum_exp(std::span<const double> values) {
  const double max = *std::max_element(values.begin(), values.end());
  if (max == -std::numeric_limits<double>::infinity()) return max;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

// alpha[t, j] = log-sum over prefixes ending in label j at t.
Tensor forward_table(const Tensor& emis, const Tensor& trans) {
  const std::size_t steps = emis.dim(0);
  const std::size_t labels = emis.dim(1);
  const std::size_t start = start_state(labels);
  Tensor alpha({steps, labels});
  for (std::size_t j = 0; j < labels; ++j) alpha.at(0, j) = trans.at(start, j) + emis.at(0, j);
  std::vector<double> terms(labels);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < labels; ++j) {
      for (std::size_t i = 0; i < labels; ++i) terms[i] = alpha.at(t - 1, i) + trans.at(i, j);
      alpha.at(t, j) = log_sum_exp(terms) + emis.at(t, j);
    }
  }
  return alpha;
}

// beta[t, i] = log-sum over suffixes after position t given label i at t,
// including the STOP transition.
Tensor backward_table(const Tensor& emis, const Tensor& trans) {
  const std::size_t steps = emis.dim(0);
  const std::size_t labels = emis.dim(1);
  const std::size_t stop = stop_state(labels);
  Tensor beta({steps, labels});
  for (std::size_t i = 0; i < labels; ++i) beta.at(steps - 1, i) = trans.at(i, stop);
  std::vector<double> terms(labels);
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < labels; ++i) {
      for (std::size_t j = 0; j < labels; ++j) {
        terms[j] = trans.at(i, j) + emis.at(t + 1, j) + beta.at(t + 1, j);
      }
      beta.at(t, i) = log_sum_exp(terms);
    }
  }
  return beta;
}

double final_log_z(const Tensor& alpha, const Tensor& trans) {
  const std::size_t steps = alpha.dim(0);
  const std::size_t labels = alpha.dim(1);
  std::vector<double> terms(labels);
  for (std::size_t i = 0; i < labels; ++i) {
    terms[i] = alpha.at(steps - 1, i) + trans.at(i, stop_state(labels));
  }
  return log_sum_exp(terms);
}

}  // namespace

Tensor make_transitions(std::size_t labels) { return Tensor({labels + 2, labels + 2}); }

double score(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags) {
  validate(emissions, transitions);
  const std::size_t steps = emissions.dim(0);
  const std::size_t labels = emissions.dim(1);
  if (tags.size() != steps) {
    throw ShapeError("crf::score: " + std::to_string(tags.size()) + " tags for " +
                     std::to_string(steps) + " positions");
  }
  for (int tag : tags) {
    if (tag < 0 || static_cast<std::size_t>(tag) >= labels) {
      throw std::out_of_range("crf::score: invalid label " + std::to_string(tag));
    }
  }
  auto y = [&](std::size_t t) { return static_cast<std::size_t>(tags[t]); };
  double total = transitions.at(start_state(labels), y(0));
  for (std::size_t t = 0; t < steps; ++t) {
    total += emissions.at(t, y(t));
    if (t + 1 < steps) total += transitions.at(y(t), y(t + 1));
  }
  return total + transitions.at(y(steps - 1), stop_state(labels));
}

double log_partition(const Tensor& emissions, const Tensor& transitions) {
  validate(emissions, transitions);
  return final_log_z(forward_table(emissions, transitions), transitions);
}

Posteriors posteriors(const Tensor& emissions, const Tensor& transitions) {
  validate(emissions, transitions);
  const std::size_t steps = emissions.dim(0);
  const std::size_t labels = emissions.dim(1);
  const std::size_t start = start_state(labels);
  const std::size_t stop = stop_state(labels);
  const Tensor alpha = forward_table(emissions, transitions);
  const Tensor beta = backward_table(emissions, transitions);

  Posteriors out;
  out.log_z = final_log_z(alpha, transitions);
  out.unary = Tensor({steps, labels});
  out.pairwise = Tensor({labels + 2, labels + 2});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < labels; ++j) {
      out.unary.at(t, j) = std::exp(alpha.at(t, j) + beta.at(t, j) - out.log_z);
    }
  }
  for (std::size_t j = 0; j < labels; ++j) {
    out.pairwise.at(start, j) = out.unary.at(0, j);
    out.pairwise.at(j, stop) = out.unary.at(steps - 1, j);
  }
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    for (std::size_t i = 0; i < labels; ++i) {
      for (std::size_t j = 0; j < labels; ++j) {
        out.pairwise.at(i, j) += std::exp(alpha.at(t, i) + transitions.at(i, j) +
                                          emissions.at(t + 1, j) + beta.at(t + 1, j) -
                                          out.log_z);
      }
    }
  }
  return out;
}

NllResult nll(const Tensor& emissions, const Tensor& transitions, std::span<const int> gold) {
  const double gold_score = score(emissions, transitions, gold);
  Posteriors post = posteriors(emissions, transitions);
  const std::size_t steps = emissions.dim(0);
  const std::size_t labels = emissions.dim(1);

  NllResult out;
  // logZ >= score(gold) mathematically; clamp rounding noise.
  out.loss = std::max(0.0, post.log_z - gold_score);
  out.d_emissions = std::move(post.unary);
  out.d_transitions = std::move(post.pairwise);
  auto y = [&](std::size_t t) { return static_cast<std::size_t>(gold[t]); };
  out.d_transitions.at(start_state(labels), y(0)) -= 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    out.d_emissions.at(t, y(t)) -= 1.0;
    if (t + 1 < steps) out.d_transitions.at(y(t), y(t + 1)) -= 1.0;
  }
  out.d_transitions.at(y(steps - 1), stop_state(labels)) -= 1.0;
  return out;
}

Decoded viterbi(const Tensor& emissions, const Tensor& transitions) {
  validate(emissions, transitions);
  const std::size_t steps = emissions.dim(0);
  const std::size_t labels = emissions.dim(1);
  Tensor best({steps, labels});
  std::vector<int> backpointer(steps * labels, 0);
  for (std::size_t j = 0; j < labels; ++j) {
    best.at(0, j) = transitions.at(start_state(labels), j) + emissions.at(0, j);
  }
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < labels; ++j) {
      std::size_t arg = 0;
      double max = best.at(t - 1, 0) + transitions.at(0, j);
      for (std::size_t i = 1; i < labels; ++i) {
        const double candidate = best.at(t - 1, i) + transitions.at(i, j);
        if (candidate > max) {
          max = candidate;
          arg = i;
        }
      }
      best.at(t, j) = max + emissions.at(t, j);
      backpointer[t * labels + j] = static_cast<int>(arg);
    }
  }
  std::size_t last = 0;
  double max = best.at(steps - 1, 0) + transitions.at(0, stop_state(labels));
  for (std::size_t i = 1; i < labels; ++i) {
    const double candidate = best.at(steps - 1, i) + transitions.at(i, stop_state(labels));
    if (candidate > max) {
      max = candidate;
      last = i;
    }
  }
  Decoded out;
  out.score = max;
  out.path.assign(steps, 0);
  out.path[steps - 1] = static_cast<int>(last);
  for (std::size_t t = steps - 1; t > 0; --t) {
    out.path[t - 1] = backpointer[t * labels + static_cast<std::size_t>(out.path[t])];
  }
  return out;
}

BruteForceResult brute_force(const Tensor& emissions, const Tensor& transitions,
                             std::size_t max_paths) {
  validate(emissions, transitions);
  const std::size_t steps = emissions.dim(0);
  const std::size_t labels = emissions.dim(1);
  std::size_t count = 1;
  for (std::size_t t = 0; t < steps; ++t) {
    if (count > max_paths / labels) {
      throw std::length_error("crf::brute_force: more than " + std::to_string(max_paths) +
                              " paths");
    }
    count *= labels;
  }

  BruteForceResult out;
  out.paths.reserve(count);
  out.scores.reserve(count);
  std::vector<int> path(steps, 0);
  for (std::size_t n = 0; n < count; ++n) {
    std::size_t code = n;
    for (std::size_t t = steps; t-- > 0;) {
      path[t] = static_cast<int>(code % labels);
      code /= labels;
    }
    const double s = score(emissions, transitions, path);
    if (n == 0 || s > out.best_score) {
      out.best_score = s;
      out.best_path = path;
    }
    out.paths.push_back(path);
    out.scores.push_back(s);
  }
  out.log_z = log_sum_exp(out.scores);
  return out;
}

}  // namespace cmlid::crf
