#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cmlid/context_model.hpp"
#include "cmlid/corpus.hpp"
#include "cmlid/word_model.hpp"

namespace cmlid {

struct PipelineConfig {
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string word_model_path;
  std::string context_model_path;
  std::string out_dir = ".";
  std::string word_kind = "mnn";  // or "baseline"
  int vocab_min_count = 1;
  std::uint64_t seed = 42;
  WordModelConfig word;
  ContextModelConfig context;
  TagMap tag_map = TagMap::defaults();

  // Propagates seed into both model configs.
  void set_seed(std::uint64_t value);
  void validate() const;
};

nlohmann::json to_json(const OptimizerConfig& config);
OptimizerConfig optimizer_from_json(const nlohmann::json& j, OptimizerConfig defaults);

nlohmann::json to_json(const WordModelConfig& config);
WordModelConfig word_config_from_json(const nlohmann::json& j,
                                      WordModelConfig defaults = WordModelConfig{});

nlohmann::json to_json(const ContextModelConfig& config);
ContextModelConfig context_config_from_json(const nlohmann::json& j,
                                            ContextModelConfig defaults = ContextModelConfig{});

nlohmann::json to_json(const PipelineConfig& config);
// Keys absent from j keep their values from defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         PipelineConfig defaults = PipelineConfig{});

nlohmann::json to_json(const SynthConfig& config);

}  // namespace cmlid
