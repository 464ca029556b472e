#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmlid/context_model.hpp"
#include "cmlid/corpus.hpp"
#include "cmlid/word_model.hpp"

// Versioned JSON model archives. Each archive is self-describing: it echoes
// the model config, lists every parameter with its shape and row-major data,
// and carries the character vocabulary, tag map and a checksum over the
// canonical serialization of everything else.
namespace cmlid {

inline constexpr int kArchiveFormatVersion = 1;

class ArchiveError : public std::runtime_error {
 public:
  enum class Kind { Io, Integrity, Version, Shape, Incompatible };

  ArchiveError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct WordArchive {
  std::unique_ptr<WordScorer> model;
  CharVocab vocab;
  Threshold threshold;
  bool calibrated = false;
  TagMap tag_map = TagMap::defaults();
};

struct ContextArchive {
  std::unique_ptr<ContextModel> model;
  CharVocab vocab;
  std::uint64_t word_vocab_hash = 0;
  TagMap tag_map = TagMap::defaults();
};

std::string serialize_word_archive(const WordArchive& archive);
WordArchive parse_word_archive(std::string_view text);
void save_word_archive(const std::string& path, const WordArchive& archive);
WordArchive load_word_archive(const std::string& path);

std::string serialize_context_archive(const ContextArchive& archive);
ContextArchive parse_context_archive(std::string_view text);
void save_context_archive(const std::string& path, const ContextArchive& archive);
ContextArchive load_context_archive(const std::string& path);

// Throws ArchiveError(Incompatible) unless the context archive was trained
// on the word archive's vocabulary.
void check_compatible(const WordArchive& word, const ContextArchive& context);

std::string hex64(std::uint64_t value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace cmlid
