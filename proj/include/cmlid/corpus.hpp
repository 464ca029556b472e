#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmlid {

// Two classes: the romanized native language (Bn/Hi) and English.
enum class LanguageTag : int { Native = 0, En = 1 };

inline int label_of(LanguageTag tag) { return static_cast<int>(tag); }
inline LanguageTag tag_of(int label) { return label == 0 ? LanguageTag::Native : LanguageTag::En; }
inline LanguageTag flip(LanguageTag tag) {
  return tag == LanguageTag::Native ? LanguageTag::En : LanguageTag::Native;
}

class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& message, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Surface names for the two tags. Several surfaces may map to one tag; the
// first registered surface of each tag is the canonical output name.
class TagMap {
 public:
  TagMap(std::string native_name, std::string en_name);

  // "native=native,native=bn,native=hi,en=en"
  static TagMap defaults();
  // Parses "native=bn,en=en" (keys: native|en; repeat a key for aliases).
  static TagMap parse(std::string_view spec);

  void add_alias(LanguageTag tag, std::string surface);

  std::optional<LanguageTag> find(std::string_view surface) const;
  const std::string& name(LanguageTag tag) const;
  std::string to_spec() const;

  const std::vector<std::pair<std::string, LanguageTag>>& entries() const { return entries_; }

  friend bool operator==(const TagMap&, const TagMap&) = default;

 private:
  std::vector<std::pair<std::string, LanguageTag>> entries_;
};

struct Token {
  std::string surface;
  std::optional<LanguageTag> gold;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Instance {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Instance&, const Instance&) = default;
};

enum class Split { Train, Dev, Test };

struct Corpus {
  std::vector<Instance> instances;
  Split split = Split::Train;

  std::size_t token_count() const;
  bool empty() const { return instances.empty(); }
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

const char* split_name(Split split);

// TSV: "surface<TAB>tag" per line, blank line ends an instance.
Corpus parse_corpus(std::string_view text, const TagMap& tag_map, Split split = Split::Train);
std::string serialize_corpus(const Corpus& corpus, const TagMap& tag_map);

struct UntaggedInput {
  std::vector<Instance> instances;
  std::vector<std::size_t> skipped_lines;  // 1-based numbers of blank lines
};

// One whitespace-tokenized sentence per line; blank lines are skipped.
UntaggedInput parse_untagged(std::string_view text);

// Character vocabulary over lowercased code points. ids are dense; PAD = 0 and
// UNK = 1 are reserved, real characters follow in code point order.
class CharVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  CharVocab() = default;
  // chars must be distinct; they receive ids 2, 3, ... in the given order.
  explicit CharVocab(std::vector<char32_t> chars);

  int id(char32_t cp) const;  // UNK when absent; cp is lowercased first
  std::size_t size() const { return chars_.size() + 2; }
  const std::vector<char32_t>& chars() const { return chars_; }
  bool contains(char32_t cp) const;

  // FNV-1a over the id-ordered characters.
  std::uint64_t hash() const;

  friend bool operator==(const CharVocab& a, const CharVocab& b) { return a.chars_ == b.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, int> ids_;
};

CharVocab build_char_vocab(const Corpus& corpus, int min_count = 1);

inline constexpr std::size_t kDefaultMaxWordLen = 15;

// Left-aligned ids, PAD on the right, truncated from the right.
std::vector<int> encode_word(std::string_view word, const CharVocab& vocab,
                             std::size_t max_len = kDefaultMaxWordLen);

// Number of leading non-PAD ids.
std::size_t encoded_length(const std::vector<int>& ids);

// Per-utterance code-mixing index in [0, 100): 100 * (1 - max_i w_i / n).
double cmi(const Instance& instance);

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t native_tokens = 0;
  std::size_t unique_native_tokens = 0;  // case-folded surfaces
  double mean_cmi = 0.0;
};

CorpusStats corpus_stats(const Corpus& corpus);

struct SynthConfig {
  std::size_t train_instances = 3000;
  std::size_t dev_instances = 1000;
  std::size_t test_instances = 2000;
  std::size_t tokens_per_instance = 8;
  double ambiguity_rate = 0.3;
  std::uint64_t seed = 7;
  std::size_t lexicon_size = 400;          // words per language
  std::size_t ambiguous_lexicon_size = 24;

  void validate() const;
};

struct SynthCorpora {
  Corpus train;
  Corpus dev;
  Corpus test;
  std::set<std::string> ambiguous_lexicon;
};

// Two synthetic languages on disjoint alphabets (NATIVE a..m, EN n..z). An
// ambiguous surface mixes both alphabets; its gold tag is the majority tag of
// the unambiguous tokens in its instance.
SynthCorpora synth_corpus(const SynthConfig& config);

}  // namespace cmlid
