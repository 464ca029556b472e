#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmlid/tensor.hpp"

// Linear-chain CRF over L labels. Transitions are an [L+2, L+2] matrix indexed
// [from, to]; index L is the virtual START state and L+1 the virtual STOP
// state. Transitions into START and out of STOP are never scored.
namespace cmlid::crf {

inline std::size_t start_state(std::size_t labels) { return labels; }
inline std::size_t stop_state(std::size_t labels) { return labels + 1; }

// Zero-filled [L+2, L+2] transition matrix.
Tensor make_transitions(std::size_t labels);

// trans[START, y1] + sum_t emis[t, y_t] + sum_t trans[y_t, y_t+1] + trans[y_T, STOP]
double score(const Tensor& emissions, const Tensor& transitions, std::span<const int> tags);

// log of the sum of exp(score) over all L^T paths, by the forward recursion.
double log_partition(const Tensor& emissions, const Tensor& transitions);

struct Posteriors {
  double log_z = 0.0;
  Tensor unary;     // [T, L] P(y_t = l)
  Tensor pairwise;  // [L+2, L+2] expected transition counts, boundaries included
};

// Forward-backward. unary is d logZ / d emissions and pairwise is
// d logZ / d transitions.
Posteriors posteriors(const Tensor& emissions, const Tensor& transitions);

struct NllResult {
  double loss = 0.0;
  Tensor d_emissions;    // [T, L]
  Tensor d_transitions;  // [L+2, L+2]
};

// logZ - score(gold) and its gradients.
NllResult nll(const Tensor& emissions, const Tensor& transitions, std::span<const int> gold);

struct Decoded {
  std::vector<int> path;
  double score = 0.0;
};

// Max-sum dynamic program; ties go to the lower label index.
Decoded viterbi(const Tensor& emissions, const Tensor& transitions);

struct BruteForceResult {
  double log_z = 0.0;
  std::vector<int> best_path;
  double best_score = 0.0;
  std::vector<std::vector<int>> paths;  // every path, lexicographic order
  std::vector<double> scores;           // matching scores
};

inline constexpr std::size_t kBruteForceMaxPaths = 10000;

// Exhaustive enumeration. Throws std::length_error when L^T exceeds max_paths.
BruteForceResult brute_force(const Tensor& emissions, const Tensor& transitions,
                             std::size_t max_paths = kBruteForceMaxPaths);

}  // namespace cmlid::crf
