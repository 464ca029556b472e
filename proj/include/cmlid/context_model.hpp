#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cmlid/corpus.hpp"
#include "cmlid/crf.hpp"
#include "cmlid/layers.hpp"
#include "cmlid/optimizer.hpp"
#include "cmlid/word_model.hpp"

namespace cmlid {

struct ContextModelConfig {
  std::size_t char_dim = 30;
  std::size_t char_hidden = 15;  // per direction; fe2 width is twice this
  std::size_t bilstm_hidden = 50;
  std::size_t labels = 2;
  std::size_t max_word_len = kDefaultMaxWordLen;
  OptimizerConfig optimizer = OptimizerConfig::sgd_decay_defaults();
  std::size_t batch = 16;
  std::size_t epochs = 210;
  std::uint64_t seed = 42;
  bool train_transitions = true;
  // Restore the parameters of the best dev epoch once the budget is spent.
  bool keep_best = true;

  void validate() const;
  std::size_t feature_dim() const { return 1 + 2 * char_hidden; }
};

// An instance prepared for the context model: character ids per token (no
// padding), the frozen word model's scores, and gold labels when known.
struct EncodedInstance {
  std::vector<std::vector<int>> chars;
  std::vector<double> word_scores;
  std::vector<int> gold;

  std::size_t size() const { return chars.size(); }
};

EncodedInstance encode_instance(const Instance& instance, const WordScorer& word_model,
                                const CharVocab& vocab, std::size_t max_word_len);

struct ContextForwardState {
  std::vector<CharEncoderCache> chars;
  Tensor features;  // [T, 1 + fe2]
  BiLstmCache sentence;
  DenseCache projection;
  Tensor emissions;  // [T, L]
};

// fe = (word score, character encoding) per token, a Bi-LSTM over the fe
// sequence, a linear projection to label scores and a CRF on top.
class ContextModel {
 public:
  ContextModel(const ContextModelConfig& config, std::size_t vocab_size);

  const ContextModelConfig& config() const { return config_; }

  // [T, feature_dim]
  Tensor features(const EncodedInstance& instance, ContextForwardState* state = nullptr) const;
  // [T, labels]
  Tensor emissions(const Tensor& features, ContextForwardState* state = nullptr) const;
  Tensor forward(const EncodedInstance& instance, ContextForwardState* state = nullptr) const;

  // Backpropagates d_emissions through projection and Bi-LSTM; returns the
  // feature gradient without touching the character encoder.
  Tensor backward_emissions(const ContextForwardState& state, const Tensor& d_emissions);
  // Full backward including the character encoder.
  void backward(const ContextForwardState& state, const Tensor& d_emissions);

  // CRF negative log-likelihood of the gold labels; gradients scaled by
  // weight are accumulated. Returns the unscaled loss.
  double accumulate(const EncodedInstance& instance, double weight = 1.0);

  std::vector<int> decode(const EncodedInstance& instance) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  // Parameters the optimizer updates (transitions optional).
  std::vector<Parameter*> trainable_parameters();

  CharEncoder char_encoder;
  BiLstm sentence_encoder;
  Dense projection;
  Parameter transitions;  // [L+2, L+2]

 private:
  ContextModelConfig config_;
};

// [T, 1 + fe2] feature rows for one instance.
Tensor extract_features(const ContextModel& model, const WordScorer& word_model,
                        const CharVocab& vocab, const Instance& instance);

// Emission scores for a feature sequence.
Tensor context_forward(const ContextModel& model, const Tensor& features);

std::vector<LanguageTag> tag_instance(const ContextModel& model, const WordScorer& word_model,
                                      const CharVocab& vocab, const Instance& instance);

struct ContextEpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean NLL per instance
  double learning_rate = 0.0;
  double dev_accuracy = 0.0;
  bool improved = false;
};

struct ContextTrainResult {
  std::vector<ContextEpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

// Mini-batch SGD with lr0 / (1 + decay * epoch) and L2 on the summed batch
// NLL. The word model is only read.
ContextTrainResult train_context_model(
    ContextModel& model, const WordScorer& word_model, const Corpus& train, const Corpus& dev,
    const CharVocab& vocab, const std::function<void(const ContextEpochRecord&)>& on_epoch = {});

std::string history_csv(const std::vector<ContextEpochRecord>& history);

// Token accuracy of Viterbi decoding over prepared instances.
double tagging_accuracy(const ContextModel& model, const std::vector<EncodedInstance>& data);

}  // namespace cmlid
