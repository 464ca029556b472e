#include "cmlid/config.hpp"

#include <stdexcept>

namespace cmlid {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

const char* kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd_decay";
}

OptimizerKind kind_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd_decay") return OptimizerKind::SgdDecay;
  throw std::invalid_argument("unknown optimizer kind '" + name + "'");
}

}  // namespace

void PipelineConfig::set_seed(std::uint64_t value) {
  seed = value;
  word.seed = value;
  context.seed = value;
}

void PipelineConfig::validate() const {
  if (word_kind != "mnn" && word_kind != "baseline") {
    throw std::invalid_argument("word_kind must be 'mnn' or 'baseline'");
  }
  if (vocab_min_count < 1) throw std::invalid_argument("vocab_min_count must be >= 1");
  word.validate();
  context.validate();
}

json to_json(const OptimizerConfig& c) {
  return json{{"kind", kind_name(c.kind)}, {"lr0", c.lr0},       {"decay", c.decay},
              {"l2_lambda", c.l2_lambda},  {"beta1", c.beta1},   {"beta2", c.beta2},
              {"epsilon", c.epsilon}};
}

OptimizerConfig optimizer_from_json(const json& j, OptimizerConfig c) {
  if (j.contains("kind")) c.kind = kind_from_name(j.at("kind").get<std::string>());
  read(j, "lr0", c.lr0);
  read(j, "decay", c.decay);
  read(j, "l2_lambda", c.l2_lambda);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  return c;
}

json to_json(const WordModelConfig& c) {
  return json{{"char_dim", c.char_dim},
              {"kernel_sizes", c.kernel_sizes},
              {"filters_per_channel", c.filters_per_channel},
              {"pool", c.pool},
              {"dropout", c.dropout},
              {"lstm_sizes", c.lstm_sizes},
              {"dense_sizes", c.dense_sizes},
              {"max_len", c.max_len},
              {"seed", c.seed},
              {"epochs", c.epochs},
              {"batch", c.batch},
              {"optimizer", to_json(c.optimizer)}};
}

WordModelConfig word_config_from_json(const json& j, WordModelConfig c) {
  read(j, "char_dim", c.char_dim);
  read(j, "kernel_sizes", c.kernel_sizes);
  read(j, "filters_per_channel", c.filters_per_channel);
  read(j, "pool", c.pool);
  read(j, "dropout", c.dropout);
  read(j, "lstm_sizes", c.lstm_sizes);
  read(j, "dense_sizes", c.dense_sizes);
  read(j, "max_len", c.max_len);
  read(j, "seed", c.seed);
  read(j, "epochs", c.epochs);
  read(j, "batch", c.batch);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"), c.optimizer);
  return c;
}

json to_json(const ContextModelConfig& c) {
  return json{{"char_dim", c.char_dim},
              {"char_hidden", c.char_hidden},
              {"bilstm_hidden", c.bilstm_hidden},
              {"labels", c.labels},
              {"max_word_len", c.max_word_len},
              {"optimizer", to_json(c.optimizer)},
              {"batch", c.batch},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"train_transitions", c.train_transitions},
              {"keep_best", c.keep_best}};
}

ContextModelConfig context_config_from_json(const json& j, ContextModelConfig c) {
  read(j, "char_dim", c.char_dim);
  read(j, "char_hidden", c.char_hidden);
  read(j, "bilstm_hidden", c.bilstm_hidden);
  read(j, "labels", c.labels);
  read(j, "max_word_len", c.max_word_len);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"), c.optimizer);
  read(j, "batch", c.batch);
  read(j, "epochs", c.epochs);
  read(j, "seed", c.seed);
  read(j, "train_transitions", c.train_transitions);
  read(j, "keep_best", c.keep_best);
  return c;
}

json to_json(const PipelineConfig& c) {
  return json{{"paths",
               {{"train", c.train_path},
                {"dev", c.dev_path},
                {"test", c.test_path},
                {"word_model", c.word_model_path},
                {"context_model", c.context_model_path},
                {"out", c.out_dir}}},
              {"word_kind", c.word_kind},
              {"vocab_min_count", c.vocab_min_count},
              {"seed", c.seed},
              {"word", to_json(c.word)},
              {"context", to_json(c.context)},
              {"tag_map", c.tag_map.to_spec()}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    read(p, "train", c.train_path);
    read(p, "dev", c.dev_path);
    read(p, "test", c.test_path);
    read(p, "word_model", c.word_model_path);
    read(p, "context_model", c.context_model_path);
    read(p, "out", c.out_dir);
  }
  read(j, "word_kind", c.word_kind);
  read(j, "vocab_min_count", c.vocab_min_count);
  if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
  if (j.contains("word")) c.word = word_config_from_json(j.at("word"), c.word);
  if (j.contains("context")) c.context = context_config_from_json(j.at("context"), c.context);
  if (j.contains("tag_map")) c.tag_map = TagMap::parse(j.at("tag_map").get<std::string>());
  return c;
}

json to_json(const SynthConfig& c) {
  return json{{"train_instances", c.train_instances},
              {"dev_instances", c.dev_instances},
              {"test_instances", c.test_instances},
              {"tokens_per_instance", c.tokens_per_instance},
              {"ambiguity_rate", c.ambiguity_rate},
              {"seed", c.seed},
              {"lexicon_size", c.lexicon_size},
              {"ambiguous_lexicon_size", c.ambiguous_lexicon_size}};
}

}  // namespace cmlid
