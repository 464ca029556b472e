#include "cmlid/word_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cmlid {

namespace {

void prefix_names(std::vector<Parameter*> params, const std::string& prefix) {
  for (Parameter* p : params) p->name = prefix + "." + p->name;
}

std::size_t lstm_steps(std::span<const int> ids) {
  const auto it = std::find(ids.begin(), ids.end(), CharVocab::kPad);
  return std::max<std::size_t>(1, static_cast<std::size_t>(it - ids.begin()));
}

Tensor leading_rows(const Tensor& x, std::size_t rows) {
  Tensor out({rows, x.dim(1)});
  std::copy_n(x.data().begin(), rows * x.dim(1), out.data().begin());
  return out;
}

void check_length(std::span<const int> ids, std::size_t max_len) {
  if (ids.size() != max_len) {
    throw ShapeError("word encoding has length " + std::to_string(ids.size()) +
                     ", model expects " + std::to_string(max_len));
  }
}

}  // namespace

std::vector<LabeledWord> labeled_words(const Corpus& corpus, const CharVocab& vocab,
                                       std::size_t max_len) {
  std::vector<LabeledWord> out;
  out.reserve(corpus.token_count());
  for (const Instance& inst : corpus.instances) {
    for (const Token& tok : inst.tokens) {
      if (!tok.gold) throw CorpusError("training and evaluation need gold tags");
      out.push_back(LabeledWord{encode_word(tok.surface, vocab, max_len), *tok.gold});
    }
  }
  return out;
}

// -------------------------------------------------------------- WordScorer

std::vector<const Parameter*> WordScorer::parameters() const {
  auto mutable_params = const_cast<WordScorer*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t WordScorer::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

std::uint64_t WordScorer::checksum() const {
  const auto params = parameters();
  return parameter_checksum(params);
}

// --------------------------------------------------------- WordModelConfig

void WordModelConfig::validate() const {
  if (char_dim == 0 || filters_per_channel == 0 || pool == 0 || max_len == 0) {
    throw std::invalid_argument("word model dimensions must be positive");
  }
  if (dense_sizes[1] != 1) throw std::invalid_argument("word model output layer must have size 1");
  if (dense_sizes[0] == 0 || lstm_sizes[0] == 0 || lstm_sizes[1] == 0) {
    throw std::invalid_argument("word model layer sizes must be positive");
  }
  for (std::size_t k : kernel_sizes) {
    if (k == 0) throw std::invalid_argument("kernel sizes must be positive");
    if (max_len < k || (max_len - k + 1) < pool) {
      throw std::invalid_argument("max_len " + std::to_string(max_len) +
                                  " too short for kernel size " + std::to_string(k) +
                                  " and pool " + std::to_string(pool));
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  if (epochs == 0 || batch == 0) throw std::invalid_argument("epochs and batch must be positive");
  optimizer.validate();
}

std::size_t WordModelConfig::conv_feature_width(std::size_t channel) const {
  return ((max_len - kernel_sizes[channel] + 1) / pool) * filters_per_channel;
}

std::size_t WordModelConfig::concat_width() const {
  std::size_t width = lstm_sizes[1];
  for (std::size_t c = 0; c < 3; ++c) width += conv_feature_width(c);
  return width;
}

// --------------------------------------------------------------- WordModel

WordModel::WordModel(const WordModelConfig& config, std::size_t vocab_size) : config_(config) {
  config_.validate();
  embedding = Embedding(vocab_size, config_.char_dim);
  for (std::size_t c = 0; c < 3; ++c) {
    convs[c] = Conv1D(config_.char_dim, config_.filters_per_channel, config_.kernel_sizes[c],
                      Activation::Relu);
  }
  lstms[0] = Lstm(config_.char_dim, config_.lstm_sizes[0]);
  lstms[1] = Lstm(config_.lstm_sizes[0], config_.lstm_sizes[1]);
  hidden = Dense(config_.concat_width(), config_.dense_sizes[0], Activation::Relu);
  output = Dense(config_.dense_sizes[0], 1, Activation::Sigmoid);

  prefix_names(embedding.parameters(), "embedding");
  for (std::size_t c = 0; c < 3; ++c) prefix_names(convs[c].parameters(), "conv" + std::to_string(c));
  for (std::size_t l = 0; l < 2; ++l) prefix_names(lstms[l].parameters(), "lstm" + std::to_string(l));
  prefix_names(hidden.parameters(), "hidden");
  prefix_names(output.parameters(), "output");

  Rng rng(config_.seed);
  embedding.init(rng);
  for (Conv1D& conv : convs) conv.init(rng);
  for (Lstm& lstm : lstms) lstm.init(rng);
  hidden.init(rng);
  output.init(rng);
}

std::vector<Parameter*> WordModel::parameters() {
  std::vector<Parameter*> out = embedding.parameters();
  auto append = [&](std::vector<Parameter*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (Conv1D& conv : convs) append(conv.parameters());
  for (Lstm& lstm : lstms) append(lstm.parameters());
  append(hidden.parameters());
  append(output.parameters());
  return out;
}

double WordModel::forward(std::span<const int> ids, Mode mode, Rng* rng,
                          WordForwardState* state, const ChannelMask& mask) const {
  check_length(ids, config_.max_len);
  WordForwardState local;
  WordForwardState& s = state ? *state : local;
  s.ids.assign(ids.begin(), ids.end());
  s.embedded = embedding.forward(ids);
  s.concat = Tensor({config_.concat_width()});

  std::size_t offset = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor conv_out = convs[c].forward(s.embedded, &s.conv[c]);
    Tensor dropped = dropout_forward(conv_out, config_.dropout, mode, rng, &s.dropout[c]);
    Tensor pooled = maxpool1d_forward(dropped, config_.pool, &s.pool[c]);
    if (mask.enabled[c]) {
      std::copy(pooled.data().begin(), pooled.data().end(),
                s.concat.data().begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pooled.size();
  }

  s.lstm_steps = lstm_steps(ids);
  Tensor h1 = lstms[0].forward(leading_rows(s.embedded, s.lstm_steps), &s.lstm[0]);
  Tensor h2 = lstms[1].forward_last(h1, &s.lstm[1]);
  if (mask.enabled[3]) {
    std::copy(h2.data().begin(), h2.data().end(),
              s.concat.data().begin() + static_cast<std::ptrdiff_t>(offset));
  }

  Tensor hid = hidden.forward(s.concat, &s.hidden);
  Tensor out = output.forward(hid, &s.output);
  s.score = out[0];
  return s.score;
}

void WordModel::backward(const WordForwardState& s, double d_score) {
  Tensor d_out({1}, d_score);
  Tensor d_hidden = output.backward(s.output, d_out);
  Tensor d_concat = hidden.backward(s.hidden, d_hidden);
  Tensor d_embedded(s.embedded.shape());

  std::size_t offset = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t pooled_len =
        (s.conv[c].output.dim(0) / config_.pool) * config_.filters_per_channel;
    Tensor d_pooled({pooled_len / config_.filters_per_channel, config_.filters_per_channel});
    std::copy_n(d_concat.data().begin() + static_cast<std::ptrdiff_t>(offset), pooled_len,
                d_pooled.data().begin());
    offset += pooled_len;
    Tensor d_dropped = maxpool1d_backward(s.pool[c], d_pooled);
    Tensor d_conv = dropout_backward(s.dropout[c], d_dropped);
    Tensor d_x = convs[c].backward(s.conv[c], d_conv);
    for (std::size_t i = 0; i < d_x.size(); ++i) d_embedded[i] += d_x[i];
  }

  Tensor d_h2({config_.lstm_sizes[1]});
  std::copy_n(d_concat.data().begin() + static_cast<std::ptrdiff_t>(offset), d_h2.size(),
              d_h2.data().begin());
  Tensor d_h1 = lstms[1].backward_last(s.lstm[1], d_h2);
  Tensor d_x = lstms[0].backward(s.lstm[0], d_h1);
  for (std::size_t i = 0; i < d_x.size(); ++i) d_embedded[i] += d_x[i];

  embedding.backward(s.ids, d_embedded);
}

double WordModel::score(std::span<const int> ids) const {
  return forward(ids, Mode::Infer, nullptr);
}

std::pair<double, double> WordModel::accumulate(std::span<const int> ids, int label,
                                                double weight, Rng& rng) {
  WordForwardState state;
  const double p = forward(ids, Mode::Train, &rng, &state);
  const BceResult bce = bce_loss(p, label);
  backward(state, weight * bce.grad);
  return {bce.loss, p};
}

// ----------------------------------------------------------- BaselineModel

BaselineModel::BaselineModel(const WordModelConfig& config, std::size_t vocab_size)
    : config_(config) {
  config_.validate();
  embedding = Embedding(vocab_size, config_.char_dim);
  std::size_t in = config_.char_dim;
  for (std::size_t l = 0; l < 3; ++l) {
    lstms[l] = Lstm(in, kLstmSizes[l]);
    in = kLstmSizes[l];
  }
  output = Dense(in, 1, Activation::Sigmoid);

  prefix_names(embedding.parameters(), "embedding");
  for (std::size_t l = 0; l < 3; ++l) prefix_names(lstms[l].parameters(), "lstm" + std::to_string(l));
  prefix_names(output.parameters(), "output");

  Rng rng(config_.seed);
  embedding.init(rng);
  for (Lstm& lstm : lstms) lstm.init(rng);
  output.init(rng);
}

std::vector<Parameter*> BaselineModel::parameters() {
  std::vector<Parameter*> out = embedding.parameters();
  for (Lstm& lstm : lstms) {
    for (Parameter* p : lstm.parameters()) out.push_back(p);
  }
  for (Parameter* p : output.parameters()) out.push_back(p);
  return out;
}

double BaselineModel::score(std::span<const int> ids) const {
  check_length(ids, config_.max_len);
  Tensor x = leading_rows(embedding.forward(ids), lstm_steps(ids));
  x = lstms[0].forward(x);
  x = lstms[1].forward(x);
  Tensor last = lstms[2].forward_last(x);
  return output.forward(last)[0];
}

std::pair<double, double> BaselineModel::accumulate(std::span<const int> ids, int label,
                                                    double weight, Rng& /*rng*/) {
  check_length(ids, config_.max_len);
  const std::size_t steps = lstm_steps(ids);
  std::array<LstmCache, 3> caches;
  DenseCache out_cache;
  Tensor x = leading_rows(embedding.forward(ids), steps);
  x = lstms[0].forward(x, &caches[0]);
  x = lstms[1].forward(x, &caches[1]);
  Tensor last = lstms[2].forward_last(x, &caches[2]);
  const double p = output.forward(last, &out_cache)[0];

  const BceResult bce = bce_loss(p, label);
  Tensor d = output.backward(out_cache, Tensor({1}, weight * bce.grad));
  d = lstms[2].backward_last(caches[2], d);
  d = lstms[1].backward(caches[1], d);
  d = lstms[0].backward(caches[0], d);
  Tensor d_embedded({ids.size(), config_.char_dim});
  std::copy(d.data().begin(), d.data().end(), d_embedded.data().begin());
  embedding.backward(ids, d_embedded);
  return {bce.loss, p};
}

std::unique_ptr<WordScorer> make_word_scorer(const std::string& kind,
                                             const WordModelConfig& config,
                                             std::size_t vocab_size) {
  if (kind == "mnn") return std::make_unique<WordModel>(config, vocab_size);
  if (kind == "baseline") return std::make_unique<BaselineModel>(config, vocab_size);
  throw std::invalid_argument("unknown word model kind '" + kind + "'");
}

// ----------------------------------------------------------------- Training

WordTrainOptions train_options(const WordModelConfig& config) {
  WordTrainOptions options;
  options.epochs = config.epochs;
  options.batch = config.batch;
  options.optimizer = config.optimizer;
  options.seed = config.seed;
  return options;
}

std::vector<double> score_all(const WordScorer& model, const std::vector<LabeledWord>& words) {
  std::vector<double> scores;
  scores.reserve(words.size());
  for (const LabeledWord& w : words) scores.push_back(model.score(w.ids));
  return scores;
}

std::vector<WordEpochRecord> train_word_model(WordScorer& model,
                                              const std::vector<LabeledWord>& train,
                                              const std::vector<LabeledWord>& dev,
                                              const WordTrainOptions& options) {
  if (train.empty()) throw std::invalid_argument("train_word_model: empty training split");
  if (dev.empty()) throw std::invalid_argument("train_word_model: empty dev split");
  if (options.epochs == 0 || options.batch == 0) {
    throw std::invalid_argument("train_word_model: epochs and batch must be positive");
  }
  options.optimizer.validate();

  Rng rng(options.seed ^ 0xA5A5A5A5ULL);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::vector<Parameter*> params = model.parameters();

  std::vector<WordEpochRecord> history;
  long step = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    WordEpochRecord record;
    record.epoch = epoch + 1;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch) {
      const std::size_t end = std::min(order.size(), begin + options.batch);
      const double weight = 1.0 / static_cast<double>(end - begin);
      zero_grads(params);
      for (std::size_t k = begin; k < end; ++k) {
        const LabeledWord& example = train[order[k]];
        const int label = label_of(example.label);
        const auto [loss, p] = model.accumulate(example.ids, label, weight, rng);
        loss_sum += loss;
        if (label_of(classify_score(p, 0.5)) == label) ++correct;
        ++record.samples;
      }
      if (options.optimizer.kind == OptimizerKind::Adam) {
        adam_step(params, options.optimizer, ++step);
      } else {
        sgd_decay_step(params, options.optimizer, static_cast<long>(epoch));
      }
    }
    record.loss = loss_sum / static_cast<double>(record.samples);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(record.samples);
    std::size_t dev_correct = 0;
    for (const LabeledWord& w : dev) {
      if (classify_score(model.score(w.ids), 0.5) == w.label) ++dev_correct;
    }
    record.dev_accuracy = static_cast<double>(dev_correct) / static_cast<double>(dev.size());
    history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  return history;
}

std::string history_csv(const std::vector<WordEpochRecord>& history) {
  std::string out = "epoch,loss,train_acc,dev_acc\n";
  char line[128];
  for (const WordEpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", r.epoch, r.loss, r.train_accuracy,
                  r.dev_accuracy);
    out += line;
  }
  return out;
}

// -------------------------------------------------------------- Threshold

LanguageTag classify_word(const WordScorer& model, const Threshold& threshold,
                          std::span<const int> ids) {
  return classify_score(model.score(ids), threshold.theta);
}

Threshold calibrate_threshold(std::span<const double> scores,
                              std::span<const LanguageTag> labels, double step) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("calibrate_threshold: scores and labels differ in length");
  }
  if (scores.empty()) throw std::invalid_argument("calibrate_threshold: empty input");
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("calibrate_threshold: bad step");
  const long grid = std::lround(1.0 / step);
  Threshold best{0.0, -1.0};
  for (long k = 0; k <= grid; ++k) {
    const double theta = static_cast<double>(k) / static_cast<double>(grid);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (classify_score(scores[i], theta) == labels[i]) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
    if (accuracy >= best.dev_accuracy) best = Threshold{theta, accuracy};
  }
  return best;
}

}  // namespace cmlid
