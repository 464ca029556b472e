#include "cmlid/commands.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>

#include "cmlid/archive.hpp"
#include "cmlid/eval.hpp"

namespace cmlid {

namespace fs = std::filesystem;

namespace {

std::string require_path(const std::string& path, const char* flag) {
  if (path.empty()) throw CommandError(std::string("missing required option ") + flag);
  return path;
}

std::string percent(double fraction) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * fraction << "%";
  return s.str();
}

template <typename Fn>
int run_command(CommandStreams io, Fn&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError("cannot create directory '" + dir + "': " + ec.message());
}

std::vector<double> score_words(const WordScorer& model, const std::vector<LabeledWord>& words) {
  return score_all(model, words);
}

std::vector<LanguageTag> labels_of(const std::vector<LabeledWord>& words) {
  std::vector<LanguageTag> out;
  out.reserve(words.size());
  for (const LabeledWord& w : words) out.push_back(w.label);
  return out;
}

TagSequences word_predictions(const WordArchive& archive, const Corpus& corpus) {
  TagSequences out;
  for (const Instance& inst : corpus.instances) {
    std::vector<LanguageTag> tags;
    for (const Token& tok : inst.tokens) {
      tags.push_back(classify_word(*archive.model, archive.threshold,
                                   encode_word(tok.surface, archive.vocab,
                                               archive.model->max_len())));
    }
    out.push_back(std::move(tags));
  }
  return out;
}

TagSequences context_predictions(const ContextArchive& context, const WordArchive& word,
                                 const Corpus& corpus) {
  TagSequences out;
  for (const Instance& inst : corpus.instances) {
    out.push_back(tag_instance(*context.model, *word.model, word.vocab, inst));
  }
  return out;
}

// Predictions file: corpus TSV whose tags are predictions; surfaces must
// line up with the test corpus.
TagSequences predictions_from_file(const std::string& path, const Corpus& test,
                                   const TagMap& tag_map) {
  const Corpus pred = load_corpus(path, tag_map, Split::Test);
  if (pred.instances.size() != test.instances.size()) {
    throw CommandError("'" + path + "' has " + std::to_string(pred.instances.size()) +
                       " instances, test corpus has " + std::to_string(test.instances.size()));
  }
  TagSequences out;
  for (std::size_t i = 0; i < pred.instances.size(); ++i) {
    const Instance& p = pred.instances[i];
    const Instance& g = test.instances[i];
    if (p.size() != g.size()) {
      throw CommandError("'" + path + "': instance " + std::to_string(i + 1) +
                         " length differs from the test corpus");
    }
    std::vector<LanguageTag> tags;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p.tokens[t].surface != g.tokens[t].surface) {
        throw CommandError("'" + path + "': token '" + p.tokens[t].surface +
                           "' does not match test token '" + g.tokens[t].surface + "'");
      }
      tags.push_back(*p.tokens[t].gold);
    }
    out.push_back(std::move(tags));
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::string& path, const TagMap& tag_map, Split split) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const ArchiveError&) {
    throw CommandError("cannot read corpus '" + path + "'");
  }
  try {
    return parse_corpus(text, tag_map, split);
  } catch (const CorpusError& e) {
    throw CommandError("'" + path + "': " + e.what());
  }
}

std::string word_model_output_path(const PipelineConfig& config) {
  if (!config.word_model_path.empty()) return config.word_model_path;
  return (fs::path(config.out_dir) / "word_model.json").string();
}

std::string context_model_output_path(const PipelineConfig& config) {
  if (!config.context_model_path.empty()) return config.context_model_path;
  return (fs::path(config.out_dir) / "context_model.json").string();
}

int cmd_train_word(const PipelineConfig& config, CommandStreams io) {
  return run_command(io, [&] {
    config.validate();
    const Corpus train = load_corpus(require_path(config.train_path, "--train"), config.tag_map,
                                     Split::Train);
    const Corpus dev = load_corpus(require_path(config.dev_path, "--dev"), config.tag_map,
                                   Split::Dev);
    ensure_dir(config.out_dir);

    WordArchive archive;
    archive.tag_map = config.tag_map;
    archive.vocab = build_char_vocab(train, config.vocab_min_count);
    archive.model = make_word_scorer(config.word_kind, config.word, archive.vocab.size());
    const auto train_words = labeled_words(train, archive.vocab, config.word.max_len);
    const auto dev_words = labeled_words(dev, archive.vocab, config.word.max_len);

    WordTrainOptions options = train_options(config.word);
    options.on_epoch = [&](const WordEpochRecord& r) {
      io.err << "epoch " << r.epoch << "/" << options.epochs << " loss " << std::fixed
             << std::setprecision(4) << r.loss << " train " << percent(r.train_accuracy)
             << " dev " << percent(r.dev_accuracy) << "\n";
    };
    const auto history = train_word_model(*archive.model, train_words, dev_words, options);

    archive.threshold =
        calibrate_threshold(score_words(*archive.model, dev_words), labels_of(dev_words));
    archive.calibrated = true;

    const std::string model_path = word_model_output_path(config);
    save_word_archive(model_path, archive);
    const std::string history_path = (fs::path(config.out_dir) / "word_history.csv").string();
    write_file(history_path, history_csv(history));

    io.out << "model: " << model_path << "\n";
    io.out << "history: " << history_path << "\n";
    io.out << "threshold: theta <= " << std::fixed << std::setprecision(2)
           << archive.threshold.theta << "\n";
    io.out << "dev accuracy: " << percent(archive.threshold.dev_accuracy) << "\n";
    return 0;
  });
}

int cmd_calibrate(const PipelineConfig& config, CommandStreams io) {
  return run_command(io, [&] {
    const std::string model_path = require_path(config.word_model_path, "--word-model");
    WordArchive archive = load_word_archive(model_path);
    const Corpus dev = load_corpus(require_path(config.dev_path, "--dev"), archive.tag_map,
                                   Split::Dev);
    const auto dev_words = labeled_words(dev, archive.vocab, archive.model->max_len());
    archive.threshold =
        calibrate_threshold(score_words(*archive.model, dev_words), labels_of(dev_words));
    archive.calibrated = true;
    save_word_archive(model_path, archive);
    io.out << "threshold: theta <= " << std::fixed << std::setprecision(2)
           << archive.threshold.theta << "\n";
    io.out << "dev accuracy at threshold: " << percent(archive.threshold.dev_accuracy) << " ("
           << dev_words.size() << " tokens)\n";
    return 0;
  });
}

int cmd_train_context(const PipelineConfig& config, CommandStreams io) {
  return run_command(io, [&] {
    config.context.validate();
    const WordArchive word =
        load_word_archive(require_path(config.word_model_path, "--word-model"));
    const Corpus train = load_corpus(require_path(config.train_path, "--train"), word.tag_map,
                                     Split::Train);
    const Corpus dev = load_corpus(require_path(config.dev_path, "--dev"), word.tag_map,
                                   Split::Dev);
    ensure_dir(config.out_dir);

    ContextArchive archive;
    archive.vocab = word.vocab;
    archive.word_vocab_hash = word.vocab.hash();
    archive.tag_map = word.tag_map;
    archive.model = std::make_unique<ContextModel>(config.context, word.vocab.size());
    const ContextTrainResult result = train_context_model(
        *archive.model, *word.model, train, dev, word.vocab, [&](const ContextEpochRecord& r) {
          io.err << "epoch " << r.epoch << "/" << config.context.epochs << " loss " << std::fixed
                 << std::setprecision(4) << r.loss << " lr " << r.learning_rate << " dev "
                 << percent(r.dev_accuracy) << (r.improved ? " *" : "") << "\n";
        });

    const std::string model_path = context_model_output_path(config);
    save_context_archive(model_path, archive);
    const std::string history_path =
        (fs::path(config.out_dir) / "context_history.csv").string();
    write_file(history_path, history_csv(result.history));
    io.out << "model: " << model_path << "\n";
    io.out << "history: " << history_path << "\n";
    io.out << "best dev accuracy: " << percent(result.best_dev_accuracy) << " (epoch "
           << result.best_epoch << ")\n";
    return 0;
  });
}

int cmd_tag(const PipelineConfig& config, const std::string& input_path, CommandStreams io) {
  return run_command(io, [&] {
    const WordArchive word =
        load_word_archive(require_path(config.word_model_path, "--word-model"));
    const ContextArchive context =
        load_context_archive(require_path(config.context_model_path, "--context-model"));
    check_compatible(word, context);

    std::string text;
    if (input_path == "-") {
      text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
    } else {
      try {
        text = read_file(input_path);
      } catch (const ArchiveError&) {
        throw CommandError("cannot read input '" + input_path + "'");
      }
    }
    const UntaggedInput input = parse_untagged(text);
    for (std::size_t line : input.skipped_lines) {
      io.err << "warning: skipping empty line " << line << "\n";
    }
    if (input.instances.empty()) throw CommandError("no sentences to tag");
    for (const Instance& inst : input.instances) {
      const auto tags = tag_instance(*context.model, *word.model, word.vocab, inst);
      for (std::size_t t = 0; t < inst.size(); ++t) {
        io.out << inst.tokens[t].surface << '\t' << word.tag_map.name(tags[t]) << '\n';
      }
      io.out << '\n';
    }
    return 0;
  });
}

int cmd_evaluate(const PipelineConfig& config, const EvaluateInputs& inputs, CommandStreams io) {
  return run_command(io, [&] {
    std::optional<WordArchive> word;
    if (!config.word_model_path.empty()) word = load_word_archive(config.word_model_path);
    const TagMap& tag_map = word ? word->tag_map : config.tag_map;
    const Corpus test =
        load_corpus(require_path(config.test_path, "--test"), tag_map, Split::Test);
    const std::vector<LanguageTag> gold = gold_tags(test);

    std::vector<EvaluationRow> rows;
    if (!inputs.baseline_model_path.empty()) {
      const WordArchive baseline = load_word_archive(inputs.baseline_model_path);
      rows.push_back({"baseline", confusion(flatten(test, word_predictions(baseline, test)), gold)});
    }

    std::optional<TagSequences> word_preds;
    if (!inputs.word_predictions.empty()) {
      word_preds = predictions_from_file(inputs.word_predictions, test, tag_map);
    } else if (word) {
      word_preds = word_predictions(*word, test);
    }
    std::optional<TagSequences> context_preds;
    if (!inputs.context_predictions.empty()) {
      context_preds = predictions_from_file(inputs.context_predictions, test, tag_map);
    } else if (!config.context_model_path.empty()) {
      if (!word) throw CommandError("--context-model needs --word-model");
      const ContextArchive context = load_context_archive(config.context_model_path);
      check_compatible(*word, context);
      context_preds = context_predictions(context, *word, test);
    }
    if (!word_preds && !context_preds && rows.empty()) {
      throw CommandError("nothing to evaluate: give --word-model or prediction files");
    }
    if (word_preds) rows.push_back({"word model", confusion(flatten(test, *word_preds), gold)});
    if (context_preds) {
      rows.push_back({"context model", confusion(flatten(test, *context_preds), gold)});
    }

    std::optional<ModelComparison> comparison;
    std::optional<AmbiguityReport> ambiguity;
    if (word_preds && context_preds) {
      comparison = compare_models(test, *word_preds, *context_preds);
      ambiguity = ambiguity_report(test, *word_preds, *context_preds);
    }
    io.out << "test tokens: " << gold.size() << "\n\n";
    io.out << render_report(rows, tag_map, comparison ? &*comparison : nullptr,
                            ambiguity ? &*ambiguity : nullptr);
    return 0;
  });
}

int cmd_stats(const PipelineConfig& config, CommandStreams io) {
  return run_command(io, [&] {
    const std::pair<const std::string*, Split> inputs[] = {
        {&config.train_path, Split::Train},
        {&config.dev_path, Split::Dev},
        {&config.test_path, Split::Test}};
    bool any = false;
    io.out << "split\tinstances\tnative_tokens\tunique_native\tmean_cmi\n";
    for (const auto& [path, split] : inputs) {
      if (path->empty()) continue;
      any = true;
      const CorpusStats s = corpus_stats(load_corpus(*path, config.tag_map, split));
      io.out << split_name(split) << '\t' << s.instances << '\t' << s.native_tokens << '\t'
             << s.unique_native_tokens << '\t' << std::fixed << std::setprecision(1)
             << s.mean_cmi << '\n';
    }
    if (!any) throw CommandError("give at least one of --train, --dev, --test");
    return 0;
  });
}

int cmd_synth(const SynthConfig& synth, const PipelineConfig& config, CommandStreams io) {
  return run_command(io, [&] {
    const SynthCorpora corpora = synth_corpus(synth);
    ensure_dir(config.out_dir);
    const fs::path dir(config.out_dir);
    write_file((dir / "train.tsv").string(), serialize_corpus(corpora.train, config.tag_map));
    write_file((dir / "dev.tsv").string(), serialize_corpus(corpora.dev, config.tag_map));
    write_file((dir / "test.tsv").string(), serialize_corpus(corpora.test, config.tag_map));
    std::string lexicon;
    for (const std::string& w : corpora.ambiguous_lexicon) lexicon += w + "\n";
    write_file((dir / "ambiguous_lexicon.txt").string(), lexicon);
    io.out << "wrote " << (dir / "train.tsv").string() << ", " << (dir / "dev.tsv").string()
           << ", " << (dir / "test.tsv").string() << "\n";
    return 0;
  });
}

}  // namespace cmlid
