#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "cmlid/config.hpp"

// Subcommand bodies for the cmlid tool. Each returns a process exit code;
// data goes to out, diagnostics to err.
namespace cmlid {

class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandStreams {
  std::ostream& out;
  std::ostream& err;
};

// Default artifact locations under config.out_dir unless a path is set.
std::string word_model_output_path(const PipelineConfig& config);
std::string context_model_output_path(const PipelineConfig& config);

int cmd_train_word(const PipelineConfig& config, CommandStreams io);
int cmd_calibrate(const PipelineConfig& config, CommandStreams io);
int cmd_train_context(const PipelineConfig& config, CommandStreams io);

// input_path "-" reads standard input.
int cmd_tag(const PipelineConfig& config, const std::string& input_path, CommandStreams io);

struct EvaluateInputs {
  std::string baseline_model_path;  // optional extra word-level row
  std::string word_predictions;     // TSV aligned with the test corpus
  std::string context_predictions;  // TSV aligned with the test corpus
};

int cmd_evaluate(const PipelineConfig& config, const EvaluateInputs& inputs, CommandStreams io);
int cmd_stats(const PipelineConfig& config, CommandStreams io);
int cmd_synth(const SynthConfig& synth, const PipelineConfig& config, CommandStreams io);

Corpus load_corpus(const std::string& path, const TagMap& tag_map, Split split);

}  // namespace cmlid
