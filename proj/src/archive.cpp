#include "cmlid/archive.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "cmlid/config.hpp"

namespace cmlid {

using nlohmann::json;

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError(ArchiveError::Kind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError(ArchiveError::Kind::Io, "cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ArchiveError(ArchiveError::Kind::Io, "failed writing '" + path + "'");
}

namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename Params>
json parameters_to_json(const Params& params) {
  static_assert(std::is_pointer_v<typename Params::value_type>);
  json out = json::array();
  for (const Parameter* p : params) {
    out.push_back(json{{"name", p->name},
                       {"shape", p->value.shape()},
                       {"data", std::vector<double>(p->value.data().begin(),
                                                    p->value.data().end())}});
  }
  return out;
}

void parameters_from_json(const json& j, const std::vector<Parameter*>& params) {
  if (!j.is_array() || j.size() != params.size()) {
    throw ArchiveError(ArchiveError::Kind::Shape,
                       "archive holds " + std::to_string(j.is_array() ? j.size() : 0) +
                           " parameter blocks, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& block = j.at(i);
    Parameter& p = *params[i];
    const auto name = block.at("name").get<std::string>();
    const auto shape = block.at("shape").get<Shape>();
    if (name != p.name || shape != p.value.shape()) {
      throw ArchiveError(ArchiveError::Kind::Shape,
                         "parameter " + std::to_string(i) + " is '" + name + "' " +
                             to_string(shape) + ", model expects '" + p.name + "' " +
                             to_string(p.value.shape()));
    }
    auto data = block.at("data").get<std::vector<double>>();
    try {
      p.value = Tensor::checked(shape, std::move(data));
    } catch (const std::exception& e) {
      throw ArchiveError(ArchiveError::Kind::Shape, "parameter '" + name + "': " + e.what());
    }
    p.grad = Tensor(shape);
  }
}

json vocab_to_json(const CharVocab& vocab) {
  std::vector<std::uint32_t> cps(vocab.chars().begin(), vocab.chars().end());
  return json{{"chars", cps}, {"hash", hex64(vocab.hash())}};
}

CharVocab vocab_from_json(const json& j) {
  const auto cps = j.at("chars").get<std::vector<std::uint32_t>>();
  CharVocab vocab(std::vector<char32_t>(cps.begin(), cps.end()));
  if (hex64(vocab.hash()) != j.at("hash").get<std::string>()) {
    throw ArchiveError(ArchiveError::Kind::Integrity, "vocabulary hash mismatch");
  }
  return vocab;
}

json layer_descriptor(const WordScorer& model) {
  json layers = json::array();
  if (const auto* mnn = dynamic_cast<const WordModel*>(&model)) {
    const auto& c = mnn->config();
    layers.push_back("embedding[" + std::to_string(c.char_dim) + "]");
    for (std::size_t k : c.kernel_sizes) {
      layers.push_back("conv1d[k=" + std::to_string(k) + ",f=" +
                       std::to_string(c.filters_per_channel) + ",relu]+dropout+maxpool[" +
                       std::to_string(c.pool) + "]");
    }
    layers.push_back("lstm[" + std::to_string(c.lstm_sizes[0]) + "]+lstm[" +
                     std::to_string(c.lstm_sizes[1]) + "]");
    layers.push_back("concat[" + std::to_string(c.concat_width()) + "]");
    layers.push_back("dense[" + std::to_string(c.dense_sizes[0]) + ",relu]");
    layers.push_back("dense[1,sigmoid]");
  } else {
    layers.push_back("embedding");
    for (std::size_t h : BaselineModel::kLstmSizes) layers.push_back("lstm[" + std::to_string(h) + "]");
    layers.push_back("dense[1,sigmoid]");
  }
  return layers;
}

const WordModelConfig& word_config_of(const WordScorer& model) {
  if (const auto* mnn = dynamic_cast<const WordModel*>(&model)) return mnn->config();
  return dynamic_cast<const BaselineModel&>(model).config();
}

// Adds the checksum and renders the canonical text.
std::string finish(json payload) {
  const std::uint64_t sum = fnv1a(payload.dump());
  payload["checksum"] = hex64(sum);
  return payload.dump() + "\n";
}

json open_payload(std::string_view text, const char* expected_kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArchiveError(ArchiveError::Kind::Integrity,
                       std::string("archive checksum/integrity failure (unparseable, possibly "
                                   "truncated): ") +
                           e.what());
  }
  if (!j.is_object() || !j.contains("format_version")) {
    throw ArchiveError(ArchiveError::Kind::Version, "archive has no format_version field");
  }
  const json& version = j.at("format_version");
  if (!version.is_number_integer() || version.get<long long>() != kArchiveFormatVersion) {
    throw ArchiveError(ArchiveError::Kind::Version,
                       "unsupported archive format_version " + version.dump() +
                           " (supported: " + std::to_string(kArchiveFormatVersion) + ")");
  }
  if (!j.contains("checksum") || !j.at("checksum").is_string()) {
    throw ArchiveError(ArchiveError::Kind::Integrity, "archive has no checksum");
  }
  const std::string stored = j.at("checksum").get<std::string>();
  j.erase("checksum");
  if (hex64(fnv1a(j.dump())) != stored) {
    throw ArchiveError(ArchiveError::Kind::Integrity, "archive checksum mismatch");
  }
  const std::string kind = j.value("kind", "");
  const bool kind_ok = std::string_view(expected_kind) == "word"
                           ? (kind == "mnn" || kind == "baseline")
                           : kind == expected_kind;
  if (!kind_ok) {
    throw ArchiveError(ArchiveError::Kind::Incompatible,
                       "archive kind '" + kind + "' where a " + expected_kind +
                           " model was expected");
  }
  return j;
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ArchiveError&) {
    throw;
  } catch (const std::exception& e) {
    throw ArchiveError(ArchiveError::Kind::Shape, std::string("malformed archive: ") + e.what());
  }
}

}  // namespace

std::string serialize_word_archive(const WordArchive& archive) {
  if (!archive.model) throw std::invalid_argument("word archive without a model");
  json payload{{"format_version", kArchiveFormatVersion},
               {"kind", archive.model->kind()},
               {"architecture",
                {{"config", to_json(word_config_of(*archive.model))},
                 {"layers", layer_descriptor(*archive.model)}}},
               {"parameters", parameters_to_json(archive.model->parameters())},
               {"vocab", vocab_to_json(archive.vocab)},
               {"threshold",
                {{"theta", archive.threshold.theta},
                 {"dev_accuracy", archive.threshold.dev_accuracy},
                 {"calibrated", archive.calibrated}}},
               {"tag_map", archive.tag_map.to_spec()}};
  return finish(std::move(payload));
}

WordArchive parse_word_archive(std::string_view text) {
  const json j = open_payload(text, "word");
  return guarded([&] {
    WordArchive archive;
    archive.vocab = vocab_from_json(j.at("vocab"));
    const WordModelConfig config =
        word_config_from_json(j.at("architecture").at("config"), WordModelConfig{});
    archive.model = make_word_scorer(j.at("kind").get<std::string>(), config, archive.vocab.size());
    parameters_from_json(j.at("parameters"), archive.model->parameters());
    const json& t = j.at("threshold");
    archive.threshold.theta = t.at("theta").get<double>();
    archive.threshold.dev_accuracy = t.at("dev_accuracy").get<double>();
    archive.calibrated = t.at("calibrated").get<bool>();
    archive.tag_map = TagMap::parse(j.at("tag_map").get<std::string>());
    return archive;
  });
}

void save_word_archive(const std::string& path, const WordArchive& archive) {
  write_file(path, serialize_word_archive(archive));
}

WordArchive load_word_archive(const std::string& path) {
  return parse_word_archive(read_file(path));
}

std::string serialize_context_archive(const ContextArchive& archive) {
  if (!archive.model) throw std::invalid_argument("context archive without a model");
  const ContextModelConfig& c = archive.model->config();
  json layers = json::array({"char_embedding[" + std::to_string(c.char_dim) + "]",
                             "char_bilstm[" + std::to_string(c.char_hidden) + "x2]",
                             "features[" + std::to_string(c.feature_dim()) + "]",
                             "bilstm[" + std::to_string(c.bilstm_hidden) + "x2]",
                             "dense[" + std::to_string(c.labels) + ",identity]",
                             "crf[" + std::to_string(c.labels) + "+start+stop]"});
  json payload{{"format_version", kArchiveFormatVersion},
               {"kind", "context"},
               {"architecture", {{"config", to_json(c)}, {"layers", layers}}},
               {"parameters", parameters_to_json(archive.model->parameters())},
               {"vocab", vocab_to_json(archive.vocab)},
               {"word_vocab_hash", hex64(archive.word_vocab_hash)},
               {"tag_map", archive.tag_map.to_spec()}};
  return finish(std::move(payload));
}

ContextArchive parse_context_archive(std::string_view text) {
  const json j = open_payload(text, "context");
  return guarded([&] {
    ContextArchive archive;
    archive.vocab = vocab_from_json(j.at("vocab"));
    const ContextModelConfig config =
        context_config_from_json(j.at("architecture").at("config"), ContextModelConfig{});
    archive.model = std::make_unique<ContextModel>(config, archive.vocab.size());
    parameters_from_json(j.at("parameters"), archive.model->parameters());
    archive.word_vocab_hash =
        std::stoull(j.at("word_vocab_hash").get<std::string>(), nullptr, 16);
    archive.tag_map = TagMap::parse(j.at("tag_map").get<std::string>());
    return archive;
  });
}

void save_context_archive(const std::string& path, const ContextArchive& archive) {
  write_file(path, serialize_context_archive(archive));
}

ContextArchive load_context_archive(const std::string& path) {
  return parse_context_archive(read_file(path));
}

void check_compatible(const WordArchive& word, const ContextArchive& context) {
  if (context.word_vocab_hash != word.vocab.hash() || !(context.vocab == word.vocab)) {
    throw ArchiveError(ArchiveError::Kind::Incompatible,
                       "context model was trained against a different word-model vocabulary "
                       "(vocab hash " +
                           hex64(context.word_vocab_hash) + " vs " + hex64(word.vocab.hash()) +
                           ")");
  }
}

}  // namespace cmlid
