#include "cmlid/context_model.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace cmlid {

namespace {

void prefix_names(std::vector<Parameter*> params, const std::string& prefix) {
  for (Parameter* p : params) p->name = prefix + "." + p->name;
}

std::vector<int> trimmed(std::vector<int> ids) {
  ids.resize(encoded_length(ids));
  return ids;
}

}  // namespace

void ContextModelConfig::validate() const {
  if (char_dim == 0 || char_hidden == 0 || bilstm_hidden == 0 || max_word_len == 0) {
    throw std::invalid_argument("context model dimensions must be positive");
  }
  if (labels != 2) throw std::invalid_argument("context model supports exactly 2 labels");
  if (batch == 0 || epochs == 0) throw std::invalid_argument("batch and epochs must be positive");
  if (optimizer.kind != OptimizerKind::SgdDecay) {
    throw std::invalid_argument("context model trains with SGD and learning-rate decay");
  }
  optimizer.validate();
}

EncodedInstance encode_instance(const Instance& instance, const WordScorer& word_model,
                                const CharVocab& vocab, std::size_t max_word_len) {
  if (instance.tokens.empty()) throw std::invalid_argument("empty instance");
  EncodedInstance out;
  for (const Token& tok : instance.tokens) {
    out.chars.push_back(trimmed(encode_word(tok.surface, vocab, max_word_len)));
    out.word_scores.push_back(
        word_model.score(encode_word(tok.surface, vocab, word_model.max_len())));
    if (tok.gold) out.gold.push_back(label_of(*tok.gold));
  }
  if (!out.gold.empty() && out.gold.size() != out.chars.size()) {
    throw CorpusError("instance mixes tagged and untagged tokens");
  }
  return out;
}

// ------------------------------------------------------------ ContextModel

ContextModel::ContextModel(const ContextModelConfig& config, std::size_t vocab_size)
    : config_(config) {
  config_.validate();
  char_encoder = CharEncoder(vocab_size, config_.char_dim, config_.char_hidden);
  sentence_encoder = BiLstm(config_.feature_dim(), config_.bilstm_hidden);
  projection = Dense(2 * config_.bilstm_hidden, config_.labels, Activation::Identity);
  transitions = Parameter("crf.transitions", {config_.labels + 2, config_.labels + 2});

  prefix_names(char_encoder.embedding.parameters(), "char_embedding");
  prefix_names(char_encoder.encoder.parameters(), "char_encoder");
  prefix_names(sentence_encoder.parameters(), "sentence_encoder");
  prefix_names(projection.parameters(), "projection");

  Rng rng(config_.seed);
  char_encoder.init(rng);
  sentence_encoder.init(rng);
  projection.init(rng);
}

std::vector<Parameter*> ContextModel::parameters() {
  std::vector<Parameter*> out = char_encoder.parameters();
  for (Parameter* p : sentence_encoder.parameters()) out.push_back(p);
  for (Parameter* p : projection.parameters()) out.push_back(p);
  out.push_back(&transitions);
  return out;
}

std::vector<const Parameter*> ContextModel::parameters() const {
  auto ps = const_cast<ContextModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::vector<Parameter*> ContextModel::trainable_parameters() {
  auto out = parameters();
  if (!config_.train_transitions) out.pop_back();
  return out;
}

Tensor ContextModel::features(const EncodedInstance& instance, ContextForwardState* state) const {
  const std::size_t steps = instance.size();
  if (steps == 0) throw std::invalid_argument("ContextModel::features: empty instance");
  if (instance.word_scores.size() != steps) {
    throw ShapeError("ContextModel::features: word score count does not match token count");
  }
  const std::size_t width = config_.feature_dim();
  Tensor out({steps, width});
  if (state) state->chars.assign(steps, CharEncoderCache{});
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor fe2 = char_encoder.forward(instance.chars[t], state ? &state->chars[t] : nullptr);
    out.at(t, 0) = instance.word_scores[t];
    std::copy(fe2.data().begin(), fe2.data().end(), out.row(t).begin() + 1);
  }
  if (state) state->features = out;
  return out;
}

Tensor ContextModel::emissions(const Tensor& feats, ContextForwardState* state) const {
  require_rank(feats, 2, "ContextModel::emissions");
  if (feats.dim(1) != config_.feature_dim()) {
    throw ShapeError("ContextModel::emissions: feature width " + std::to_string(feats.dim(1)) +
                     " != " + std::to_string(config_.feature_dim()));
  }
  Tensor encoded = sentence_encoder.forward(feats, state ? &state->sentence : nullptr);
  Tensor emis = projection.forward(encoded, state ? &state->projection : nullptr);
  if (state) {
    state->features = feats;
    state->emissions = emis;
  }
  return emis;
}

Tensor ContextModel::forward(const EncodedInstance& instance, ContextForwardState* state) const {
  return emissions(features(instance, state), state);
}

Tensor ContextModel::backward_emissions(const ContextForwardState& state,
                                        const Tensor& d_emissions) {
  Tensor d_encoded = projection.backward(state.projection, d_emissions);
  return sentence_encoder.backward(state.sentence, d_encoded);
}

void ContextModel::backward(const ContextForwardState& state, const Tensor& d_emissions) {
  Tensor d_features = backward_emissions(state, d_emissions);
  const std::size_t fe2 = char_encoder.output_dim();
  for (std::size_t t = 0; t < state.chars.size(); ++t) {
    Tensor d_fe2({fe2});
    std::copy_n(d_features.row(t).begin() + 1, fe2, d_fe2.data().begin());
    char_encoder.backward(state.chars[t], d_fe2);
  }
}

double ContextModel::accumulate(const EncodedInstance& instance, double weight) {
  if (instance.gold.size() != instance.size()) {
    throw std::invalid_argument("ContextModel::accumulate: instance has no gold labels");
  }
  ContextForwardState state;
  Tensor emis = forward(instance, &state);
  crf::NllResult result = crf::nll(emis, transitions.value, instance.gold);
  for (double& v : result.d_emissions.data()) v *= weight;
  backward(state, result.d_emissions);
  if (config_.train_transitions) {
    for (std::size_t i = 0; i < transitions.grad.size(); ++i) {
      transitions.grad[i] += weight * result.d_transitions[i];
    }
  }
  return result.loss;
}

std::vector<int> ContextModel::decode(const EncodedInstance& instance) const {
  return crf::viterbi(forward(instance), transitions.value).path;
}

Tensor extract_features(const ContextModel& model, const WordScorer& word_model,
                        const CharVocab& vocab, const Instance& instance) {
  return model.features(
      encode_instance(instance, word_model, vocab, model.config().max_word_len));
}

Tensor context_forward(const ContextModel& model, const Tensor& features) {
  return model.emissions(features);
}

std::vector<LanguageTag> tag_instance(const ContextModel& model, const WordScorer& word_model,
                                      const CharVocab& vocab, const Instance& instance) {
  const EncodedInstance encoded =
      encode_instance(instance, word_model, vocab, model.config().max_word_len);
  std::vector<LanguageTag> tags;
  for (int label : model.decode(encoded)) tags.push_back(tag_of(label));
  return tags;
}

// ----------------------------------------------------------------- Training

double tagging_accuracy(const ContextModel& model, const std::vector<EncodedInstance>& data) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const EncodedInstance& inst : data) {
    const std::vector<int> path = model.decode(inst);
    for (std::size_t t = 0; t < path.size(); ++t) correct += path[t] == inst.gold[t];
    total += path.size();
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

namespace {

std::vector<EncodedInstance> encode_corpus(const Corpus& corpus, const WordScorer& word_model,
                                           const CharVocab& vocab, std::size_t max_word_len) {
  std::map<std::string, double> score_memo;
  std::vector<EncodedInstance> out;
  out.reserve(corpus.instances.size());
  for (const Instance& inst : corpus.instances) {
    if (inst.tokens.empty()) throw std::invalid_argument("empty instance in corpus");
    EncodedInstance enc;
    for (const Token& tok : inst.tokens) {
      if (!tok.gold) throw CorpusError("context training needs gold tags");
      enc.chars.push_back(trimmed(encode_word(tok.surface, vocab, max_word_len)));
      auto [it, inserted] = score_memo.try_emplace(tok.surface, 0.0);
      if (inserted) {
        it->second = word_model.score(encode_word(tok.surface, vocab, word_model.max_len()));
      }
      enc.word_scores.push_back(it->second);
      enc.gold.push_back(label_of(*tok.gold));
    }
    out.push_back(std::move(enc));
  }
  return out;
}

}  // namespace

ContextTrainResult train_context_model(
    ContextModel& model, const WordScorer& word_model, const Corpus& train, const Corpus& dev,
    const CharVocab& vocab, const std::function<void(const ContextEpochRecord&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_context_model: empty training split");
  if (dev.empty()) throw std::invalid_argument("train_context_model: empty dev split");
  const ContextModelConfig& config = model.config();
  const std::vector<EncodedInstance> train_data =
      encode_corpus(train, word_model, vocab, config.max_word_len);
  const std::vector<EncodedInstance> dev_data =
      encode_corpus(dev, word_model, vocab, config.max_word_len);

  Rng rng(config.seed ^ 0x5A5A5A5AULL);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::vector<Parameter*> all_params = model.parameters();
  const std::vector<Parameter*> trainable = model.trainable_parameters();

  ContextTrainResult result;
  std::vector<Tensor> best_values;
  double best = -1.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    ContextEpochRecord record;
    record.epoch = epoch + 1;
    record.learning_rate = sgd_learning_rate(config.optimizer, static_cast<long>(epoch));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch);
      zero_grads(all_params);
      for (std::size_t k = begin; k < end; ++k) loss_sum += model.accumulate(train_data[order[k]]);
      sgd_decay_step(trainable, config.optimizer, static_cast<long>(epoch));
    }
    record.loss = loss_sum / static_cast<double>(train_data.size());
    record.dev_accuracy = tagging_accuracy(model, dev_data);
    if (record.dev_accuracy > best) {
      best = record.dev_accuracy;
      record.improved = true;
      result.best_epoch = record.epoch;
      result.best_dev_accuracy = best;
      if (config.keep_best) {
        best_values.clear();
        for (const Parameter* p : all_params) best_values.push_back(p->value);
      }
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  if (config.keep_best && !best_values.empty()) {
    for (std::size_t i = 0; i < all_params.size(); ++i) all_params[i]->value = best_values[i];
  }
  zero_grads(all_params);
  return result;
}

std::string history_csv(const std::vector<ContextEpochRecord>& history) {
  std::string out = "epoch,loss,lr,dev_acc\n";
  char line[128];
  for (const ContextEpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", r.epoch, r.loss, r.learning_rate,
                  r.dev_accuracy);
    out += line;
  }
  return out;
}

}  // namespace cmlid
