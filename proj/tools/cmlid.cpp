#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "cmlid/archive.hpp"
#include "cmlid/commands.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string train, dev, test;
  std::string word_model, context_model;
  std::string out;
  std::string tag_map;
  std::string word_kind;
  std::optional<std::size_t> word_epochs, context_epochs;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--train", f.train, "training corpus (TSV)");
  cmd->add_option("--dev", f.dev, "development corpus (TSV)");
  cmd->add_option("--test", f.test, "test corpus (TSV)");
  cmd->add_option("--word-model", f.word_model, "word model archive");
  cmd->add_option("--context-model", f.context_model, "context model archive");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--tag-map", f.tag_map, "tag aliases, e.g. native=bn,en=en");
  cmd->add_flag("--print-config", f.print_config, "print the resolved configuration and exit");
}

cmlid::PipelineConfig resolve(const Flags& f) {
  cmlid::PipelineConfig config;
  if (!f.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(cmlid::read_file(f.config_path));
    } catch (const std::exception& e) {
      throw cmlid::CommandError("cannot load config '" + f.config_path + "': " + e.what());
    }
    config = cmlid::pipeline_config_from_json(j);
  }
  if (f.seed) config.set_seed(*f.seed);
  if (!f.train.empty()) config.train_path = f.train;
  if (!f.dev.empty()) config.dev_path = f.dev;
  if (!f.test.empty()) config.test_path = f.test;
  if (!f.word_model.empty()) config.word_model_path = f.word_model;
  if (!f.context_model.empty()) config.context_model_path = f.context_model;
  if (!f.out.empty()) config.out_dir = f.out;
  if (!f.word_kind.empty()) config.word_kind = f.word_kind;
  if (f.word_epochs) config.word.epochs = *f.word_epochs;
  if (f.context_epochs) config.context.epochs = *f.context_epochs;
  if (!f.tag_map.empty()) {
    config.tag_map = cmlid::TagMap::parse(f.tag_map);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word-level language identification for romanized code-mixed text"};
  app.require_subcommand(1);
  Flags f;
  cmlid::SynthConfig synth;
  cmlid::EvaluateInputs eval_inputs;
  std::string input_path = "-";

  auto* train_word = app.add_subcommand("train-word", "train the word scorer and calibrate theta");
  add_common(train_word, f);
  train_word->add_option("--kind", f.word_kind, "mnn or baseline")
      ->check(CLI::IsMember({"mnn", "baseline"}));
  train_word->add_option("--epochs", f.word_epochs, "training epochs");

  auto* calibrate = app.add_subcommand("calibrate", "recalibrate theta on the dev corpus");
  add_common(calibrate, f);

  auto* train_context = app.add_subcommand("train-context", "train the Bi-LSTM-CRF tagger");
  add_common(train_context, f);
  train_context->add_option("--epochs", f.context_epochs, "training epochs");

  auto* tag = app.add_subcommand("tag", "tag whitespace-tokenized sentences");
  add_common(tag, f);
  tag->add_option("--input", input_path, "input text, one sentence per line ('-' for stdin)");

  auto* evaluate = app.add_subcommand("evaluate", "score models or prediction files on --test");
  add_common(evaluate, f);
  evaluate->add_option("--baseline-model", eval_inputs.baseline_model_path,
                       "extra word-level archive to report");
  evaluate->add_option("--word-pred", eval_inputs.word_predictions, "word-level predictions TSV");
  evaluate->add_option("--context-pred", eval_inputs.context_predictions,
                       "context-level predictions TSV");

  auto* stats = app.add_subcommand("stats", "corpus statistics");
  add_common(stats, f);

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic code-mixed corpus");
  add_common(synth_cmd, f);
  synth_cmd->add_option("--train-instances", synth.train_instances);
  synth_cmd->add_option("--dev-instances", synth.dev_instances);
  synth_cmd->add_option("--test-instances", synth.test_instances);
  synth_cmd->add_option("--tokens", synth.tokens_per_instance, "tokens per instance");
  synth_cmd->add_option("--ambiguity-rate", synth.ambiguity_rate);
  synth_cmd->add_option("--lexicon-size", synth.lexicon_size);
  synth_cmd->add_option("--ambiguous-lexicon-size", synth.ambiguous_lexicon_size);

  CLI11_PARSE(app, argc, argv);

  cmlid::CommandStreams io{std::cout, std::cerr};
  cmlid::PipelineConfig config;
  try {
    config = resolve(f);
    if (f.seed) synth.seed = *f.seed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (f.print_config) {
    nlohmann::json j = cmlid::to_json(config);
    if (*synth_cmd) j["synth"] = cmlid::to_json(synth);
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  if (*train_word) return cmlid::cmd_train_word(config, io);
  if (*calibrate) return cmlid::cmd_calibrate(config, io);
  if (*train_context) return cmlid::cmd_train_context(config, io);
  if (*tag) return cmlid::cmd_tag(config, input_path, io);
  if (*evaluate) return cmlid::cmd_evaluate(config, eval_inputs, io);
  if (*stats) return cmlid::cmd_stats(config, io);
  return cmlid::cmd_synth(synth, config, io);
}
