#include "cmlid/corpus.hpp"

#include <algorithm>
#include <numeric>

#include "cmlid/rng.hpp"
#include "cmlid/utf8.hpp"

namespace cmlid {

CorpusError::CorpusError(const std::string& message, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

// ------------------------------------------------------------------- TagMap

TagMap::TagMap(std::string native_name, std::string en_name) {
  add_alias(LanguageTag::Native, std::move(native_name));
  add_alias(LanguageTag::En, std::move(en_name));
}

TagMap TagMap::defaults() {
  TagMap map("native", "en");
  map.add_alias(LanguageTag::Native, "bn");
  map.add_alias(LanguageTag::Native, "hi");
  return map;
}

TagMap TagMap::parse(std::string_view spec) {
  std::vector<std::pair<std::string, LanguageTag>> parsed;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', pos), spec.size());
    const std::string_view item = spec.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
      throw std::invalid_argument("tag map entry '" + std::string(item) +
                                  "' is not of the form key=surface");
    }
    const std::string key(item.substr(0, eq));
    std::string surface(item.substr(eq + 1));
    LanguageTag tag;
    if (key == "native") {
      tag = LanguageTag::Native;
    } else if (key == "en") {
      tag = LanguageTag::En;
    } else {
      throw std::invalid_argument("tag map key must be 'native' or 'en', got '" + key + "'");
    }
    parsed.emplace_back(std::move(surface), tag);
  }
  auto first_of = [&](LanguageTag tag) -> std::string {
    for (const auto& [surface, t] : parsed) {
      if (t == tag) return surface;
    }
    throw std::invalid_argument("tag map needs at least one surface for each tag");
  };
  TagMap map(first_of(LanguageTag::Native), first_of(LanguageTag::En));
  for (const auto& [surface, tag] : parsed) {
    if (!map.find(surface)) map.add_alias(tag, surface);
  }
  return map;
}

void TagMap::add_alias(LanguageTag tag, std::string surface) {
  if (surface.empty()) throw std::invalid_argument("empty tag surface");
  if (auto existing = find(surface)) {
    if (*existing != tag) {
      throw std::invalid_argument("tag surface '" + surface + "' mapped to both tags");
    }
    return;
  }
  entries_.emplace_back(std::move(surface), tag);
}

std::optional<LanguageTag> TagMap::find(std::string_view surface) const {
  for (const auto& [name, tag] : entries_) {
    if (name == surface) return tag;
  }
  return std::nullopt;
}

const std::string& TagMap::name(LanguageTag tag) const {
  for (const auto& [surface, t] : entries_) {
    if (t == tag) return surface;
  }
  throw std::logic_error("tag map without a surface for a tag");
}

std::string TagMap::to_spec() const {
  std::string out;
  for (const auto& [surface, tag] : entries_) {
    if (!out.empty()) out += ',';
    out += (tag == LanguageTag::Native ? "native=" : "en=") + surface;
  }
  return out;
}

// ------------------------------------------------------------------- Corpus

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const Instance& inst : instances) n += inst.size();
  return n;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Test:
      return "test";
  }
  return "unknown";
}

namespace {

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, ++line_no);
    pos = end + 1;
  }
}

void check_utf8(std::string_view s, std::size_t line_no) {
  try {
    utf8::decode(s);
  } catch (const utf8::DecodeError& e) {
    throw CorpusError(e.what(), line_no);
  }
}

}  // namespace

Corpus parse_corpus(std::string_view text, const TagMap& tag_map, Split split) {
  Corpus corpus;
  corpus.split = split;
  Instance current;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (is_blank(line)) {
      if (!current.tokens.empty()) corpus.instances.push_back(std::move(current));
      current = Instance{};
      return;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw CorpusError("expected 2 tab-separated fields (surface, tag)", line_no);
    }
    const std::string_view surface = line.substr(0, tab);
    const std::string_view tag = line.substr(tab + 1);
    if (surface.empty() || has_whitespace(surface)) {
      throw CorpusError("token surface must be non-empty and free of whitespace", line_no);
    }
    check_utf8(surface, line_no);
    const auto gold = tag_map.find(tag);
    if (!gold) throw CorpusError("unknown tag '" + std::string(tag) + "'", line_no);
    current.tokens.push_back(Token{std::string(surface), *gold});
  });
  if (!current.tokens.empty()) corpus.instances.push_back(std::move(current));
  if (corpus.instances.empty()) throw CorpusError("corpus contains no instances");
  return corpus;
}

std::string serialize_corpus(const Corpus& corpus, const TagMap& tag_map) {
  std::string out;
  for (const Instance& inst : corpus.instances) {
    for (const Token& tok : inst.tokens) {
      if (!tok.gold) throw CorpusError("cannot serialize a token without a gold tag");
      out += tok.surface;
      out += '\t';
      out += tag_map.name(*tok.gold);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

UntaggedInput parse_untagged(std::string_view text) {
  UntaggedInput input;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    Instance inst;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && has_whitespace(line.substr(pos, 1))) ++pos;
      std::size_t end = pos;
      while (end < line.size() && !has_whitespace(line.substr(end, 1))) ++end;
      if (end > pos) {
        check_utf8(line.substr(pos, end - pos), line_no);
        inst.tokens.push_back(Token{std::string(line.substr(pos, end - pos)), std::nullopt});
      }
      pos = end;
    }
    if (inst.tokens.empty()) {
      input.skipped_lines.push_back(line_no);
    } else {
      input.instances.push_back(std::move(inst));
    }
  });
  return input;
}

// ---------------------------------------------------------------- CharVocab

CharVocab::CharVocab(std::vector<char32_t> chars) : chars_(std::move(chars)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (!ids_.emplace(chars_[i], static_cast<int>(i) + 2).second) {
      throw std::invalid_argument("duplicate character in vocabulary");
    }
  }
}

int CharVocab::id(char32_t cp) const {
  auto it = ids_.find(utf8::to_lower(cp));
  return it == ids_.end() ? kUnk : it->second;
}

bool CharVocab::contains(char32_t cp) const { return ids_.count(utf8::to_lower(cp)) > 0; }

std::uint64_t CharVocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char32_t cp : chars_) {
    for (int shift = 0; shift < 32; shift += 8) {
      h ^= (cp >> shift) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

CharVocab build_char_vocab(const Corpus& corpus, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  if (corpus.empty()) throw CorpusError("cannot build a vocabulary from an empty corpus");
  std::map<char32_t, long> counts;
  for (const Instance& inst : corpus.instances) {
    for (const Token& tok : inst.tokens) {
      for (char32_t cp : utf8::decode(tok.surface)) ++counts[utf8::to_lower(cp)];
    }
  }
  std::vector<char32_t> chars;
  for (const auto& [cp, n] : counts) {
    if (n >= min_count) chars.push_back(cp);
  }
  return CharVocab(std::move(chars));
}

std::vector<int> encode_word(std::string_view word, const CharVocab& vocab, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("encode_word: max_len must be >= 1");
  if (word.empty()) throw std::invalid_argument("encode_word: empty word");
  const std::u32string cps = utf8::decode(word);
  std::vector<int> ids(max_len, CharVocab::kPad);
  for (std::size_t i = 0; i < std::min(max_len, cps.size()); ++i) ids[i] = vocab.id(cps[i]);
  return ids;
}

std::size_t encoded_length(const std::vector<int>& ids) {
  const auto it = std::find(ids.begin(), ids.end(), CharVocab::kPad);
  return static_cast<std::size_t>(it - ids.begin());
}

// ----------------------------------------------------------------------- CMI

double cmi(const Instance& instance) {
  std::size_t counts[2] = {0, 0};
  for (const Token& tok : instance.tokens) {
    if (!tok.gold) throw CorpusError("cmi requires gold tags");
    ++counts[label_of(*tok.gold)];
  }
  const std::size_t n = counts[0] + counts[1];
  if (n == 0) return 0.0;
  const std::size_t dominant = std::max(counts[0], counts[1]);
  return 100.0 * (1.0 - static_cast<double>(dominant) / static_cast<double>(n));
}

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.empty()) throw CorpusError("corpus_stats on an empty corpus");
  CorpusStats stats;
  stats.instances = corpus.instances.size();
  std::set<std::string> unique;
  double cmi_sum = 0.0;
  for (const Instance& inst : corpus.instances) {
    cmi_sum += cmi(inst);
    for (const Token& tok : inst.tokens) {
      if (*tok.gold == LanguageTag::Native) {
        ++stats.native_tokens;
        unique.insert(utf8::to_lower(tok.surface));
      }
    }
  }
  stats.unique_native_tokens = unique.size();
  stats.mean_cmi = cmi_sum / static_cast<double>(stats.instances);
  return stats;
}

// ----------------------------------------------------------------- Synthesis

void SynthConfig::validate() const {
  if (!(ambiguity_rate >= 0.0 && ambiguity_rate <= 1.0)) {
    throw std::invalid_argument("ambiguity_rate must be in [0, 1]");
  }
  if (tokens_per_instance == 0) throw std::invalid_argument("tokens_per_instance must be >= 1");
  if (train_instances == 0 || dev_instances == 0 || test_instances == 0) {
    throw std::invalid_argument("every split needs at least one instance");
  }
  if (lexicon_size == 0 || ambiguous_lexicon_size == 0) {
    throw std::invalid_argument("lexicon sizes must be positive");
  }
}

namespace {

constexpr std::string_view kNativeAlphabet = "abcdefghijklm";
constexpr std::string_view kEnAlphabet = "nopqrstuvwxyz";

std::string random_word(Rng& rng, std::string_view alphabet, std::size_t min_len,
                        std::size_t max_len) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.below(alphabet.size())];
  return w;
}

std::vector<std::string> make_lexicon(Rng& rng, std::string_view alphabet, std::size_t size) {
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < size) {
    std::string w = random_word(rng, alphabet, 2, 8);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::vector<std::string> make_ambiguous_lexicon(Rng& rng, std::size_t size) {
  const std::string both = std::string(kNativeAlphabet) + std::string(kEnAlphabet);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < size) {
    std::string w = random_word(rng, both, 3, 6);
    const bool has_native = w.find_first_of(kNativeAlphabet) != std::string::npos;
    const bool has_en = w.find_first_of(kEnAlphabet) != std::string::npos;
    if (has_native && has_en && seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

Corpus make_split(Rng& rng, const SynthConfig& config, std::size_t instances, Split split,
                  const std::vector<std::string>& native_lex,
                  const std::vector<std::string>& en_lex,
                  const std::vector<std::string>& ambiguous_lex) {
  Corpus corpus;
  corpus.split = split;
  const std::size_t n = config.tokens_per_instance;
  for (std::size_t k = 0; k < instances; ++k) {
    const LanguageTag dominant = rng.bernoulli(0.5) ? LanguageTag::En : LanguageTag::Native;
    std::vector<bool> ambiguous(n);
    std::vector<std::size_t> plain_slots;
    for (std::size_t i = 0; i < n; ++i) {
      ambiguous[i] = rng.bernoulli(config.ambiguity_rate);
      if (!ambiguous[i]) plain_slots.push_back(i);
    }
    // Strict majority of plain tokens carries the dominant tag.
    std::vector<LanguageTag> tags(n, dominant);
    if (!plain_slots.empty()) {
      const std::size_t max_minority = (plain_slots.size() - 1) / 2;
      const std::size_t minority = rng.below(max_minority + 1);
      rng.shuffle(std::span<std::size_t>(plain_slots));
      for (std::size_t m = 0; m < minority; ++m) tags[plain_slots[m]] = flip(dominant);
    }
    Instance inst;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<std::string>& lex =
          ambiguous[i] ? ambiguous_lex : (tags[i] == LanguageTag::Native ? native_lex : en_lex);
      inst.tokens.push_back(Token{lex[rng.below(lex.size())], tags[i]});
    }
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

}  // namespace

SynthCorpora synth_corpus(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto native_lex = make_lexicon(rng, kNativeAlphabet, config.lexicon_size);
  const auto en_lex = make_lexicon(rng, kEnAlphabet, config.lexicon_size);
  const auto ambiguous_lex = make_ambiguous_lexicon(rng, config.ambiguous_lexicon_size);

  SynthCorpora out;
  out.train = make_split(rng, config, config.train_instances, Split::Train, native_lex, en_lex,
                         ambiguous_lex);
  out.dev = make_split(rng, config, config.dev_instances, Split::Dev, native_lex, en_lex,
                       ambiguous_lex);
  out.test = make_split(rng, config, config.test_instances, Split::Test, native_lex, en_lex,
                        ambiguous_lex);
  out.ambiguous_lexicon.insert(ambiguous_lex.begin(), ambiguous_lex.end());
  return out;
}

}  // namespace cmlid
