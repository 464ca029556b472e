#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmlid/corpus.hpp"
#include "cmlid/layers.hpp"
#include "cmlid/optimizer.hpp"

namespace cmlid {

struct LabeledWord {
  std::vector<int> ids;  // encode_word output, length max_len
  LanguageTag label;
};

// Every tagged token occurrence, duplicates kept.
std::vector<LabeledWord> labeled_words(const Corpus& corpus, const CharVocab& vocab,
                                       std::size_t max_len);

// A character-level model producing P(EN | word) in (0, 1).
class WordScorer {
 public:
  virtual ~WordScorer() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t max_len() const = 0;

  // Deterministic inference-mode score. Safe to call concurrently.
  virtual double score(std::span<const int> ids) const = 0;

  // Train-mode forward and backward for one example; gradients scaled by
  // weight are added to the parameter grads. Returns (unscaled loss, score).
  virtual std::pair<double, double> accumulate(std::span<const int> ids, int label,
                                               double weight, Rng& rng) = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  std::uint64_t checksum() const;
};

struct WordModelConfig {
  std::size_t char_dim = 15;
  std::array<std::size_t, 3> kernel_sizes{2, 3, 4};
  std::size_t filters_per_channel = 16;
  std::size_t pool = 2;
  double dropout = 0.2;
  std::array<std::size_t, 2> lstm_sizes{15, 25};
  std::array<std::size_t, 2> dense_sizes{15, 1};
  std::size_t max_len = kDefaultMaxWordLen;
  std::uint64_t seed = 42;
  std::size_t epochs = 30;
  std::size_t batch = 64;
  OptimizerConfig optimizer = OptimizerConfig::adam_defaults();

  void validate() const;
  std::size_t conv_feature_width(std::size_t channel) const;
  // Width of the flattened, concatenated channel outputs.
  std::size_t concat_width() const;
};

// Intermediate values of one forward pass, kept for backward and for wiring
// checks.
struct WordForwardState {
  std::vector<int> ids;
  Tensor embedded;
  std::array<Conv1DCache, 3> conv;
  std::array<DropoutCache, 3> dropout;
  std::array<MaxPoolCache, 3> pool;
  std::array<LstmCache, 2> lstm;
  std::size_t lstm_steps = 0;
  Tensor concat;
  DenseCache hidden;
  DenseCache output;
  double score = 0.0;
};

// Which channels feed the concatenation; a disabled channel contributes zeros.
struct ChannelMask {
  std::array<bool, 4> enabled{true, true, true, true};
};

// Three Conv1D -> dropout -> max-pool channels and one two-layer LSTM channel
// over one shared character embedding, concatenated into dense 15 (relu) and
// dense 1 (sigmoid). The LSTM channel reads the word's characters up to the
// first PAD and contributes its final hidden state.
class WordModel final : public WordScorer {
 public:
  WordModel(const WordModelConfig& config, std::size_t vocab_size);

  std::string kind() const override { return "mnn"; }
  std::size_t max_len() const override { return config_.max_len; }
  const WordModelConfig& config() const { return config_; }

  double score(std::span<const int> ids) const override;
  std::pair<double, double> accumulate(std::span<const int> ids, int label, double weight,
                                       Rng& rng) override;
  std::vector<Parameter*> parameters() override;
  using WordScorer::parameters;

  double forward(std::span<const int> ids, Mode mode, Rng* rng,
                 WordForwardState* state = nullptr, const ChannelMask& mask = {}) const;
  // Backpropagates dL/dscore through a state produced by forward().
  void backward(const WordForwardState& state, double d_score);

  Embedding embedding;
  std::array<Conv1D, 3> convs;
  std::array<Lstm, 2> lstms;
  Dense hidden;
  Dense output;

 private:
  WordModelConfig config_;
};

// Embedding, stacked LSTMs 15/35/25 and a size-1 sigmoid head.
class BaselineModel final : public WordScorer {
 public:
  static constexpr std::array<std::size_t, 3> kLstmSizes{15, 35, 25};

  BaselineModel(const WordModelConfig& config, std::size_t vocab_size);

  std::string kind() const override { return "baseline"; }
  std::size_t max_len() const override { return config_.max_len; }
  const WordModelConfig& config() const { return config_; }

  double score(std::span<const int> ids) const override;
  std::pair<double, double> accumulate(std::span<const int> ids, int label, double weight,
                                       Rng& rng) override;
  std::vector<Parameter*> parameters() override;
  using WordScorer::parameters;

  Embedding embedding;
  std::array<Lstm, 3> lstms;
  Dense output;

 private:
  WordModelConfig config_;
};

std::unique_ptr<WordScorer> make_word_scorer(const std::string& kind,
                                             const WordModelConfig& config,
                                             std::size_t vocab_size);

struct WordEpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;            // mean BCE over the epoch
  double train_accuracy = 0.0;  // train-mode predictions at 0.5
  double dev_accuracy = 0.0;    // inference at 0.5
  std::size_t samples = 0;      // examples consumed
};

struct WordTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  OptimizerConfig optimizer = OptimizerConfig::adam_defaults();
  std::uint64_t seed = 42;
  std::function<void(const WordEpochRecord&)> on_epoch;
};

WordTrainOptions train_options(const WordModelConfig& config);

// Mini-batch Adam on mean BCE; the example order is reshuffled every epoch.
std::vector<WordEpochRecord> train_word_model(WordScorer& model,
                                              const std::vector<LabeledWord>& train,
                                              const std::vector<LabeledWord>& dev,
                                              const WordTrainOptions& options);

// "epoch,loss,train_acc,dev_acc" lines with a header.
std::string history_csv(const std::vector<WordEpochRecord>& history);

struct Threshold {
  double theta = 0.5;
  double dev_accuracy = 0.0;  // fraction in [0, 1]
};

// score <= theta -> NATIVE
inline LanguageTag classify_score(double score, double theta) {
  return score <= theta ? LanguageTag::Native : LanguageTag::En;
}

LanguageTag classify_word(const WordScorer& model, const Threshold& threshold,
                          std::span<const int> ids);

// Sweeps theta over {0, step, 2 step, ..., 1} and keeps the most accurate;
// ties go to the largest theta.
Threshold calibrate_threshold(std::span<const double> scores,
                              std::span<const LanguageTag> labels, double step = 0.01);

std::vector<double> score_all(const WordScorer& model, const std::vector<LabeledWord>& words);

}  // namespace cmlid
