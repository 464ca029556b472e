#include <doctest.h>

#include <algorithm>
#include <set>

#include "cmlid/corpus.hpp"
#include "cmlid/utf8.hpp"
#include "support.hpp"

using namespace cmlid;

TEST_CASE("utf8 decode and lowercase") {
  const auto cps = utf8::decode("Ärger");
  REQUIRE(cps.size() == 5);
  CHECK(cps[0] == U'Ä');
  CHECK(utf8::to_lower("ÄRGER Ωμέγα") == "ärger ωμέγα");
  CHECK_THROWS_AS(utf8::decode("\xC3"), utf8::DecodeError);
  CHECK_THROWS_AS(utf8::decode("\xFF"), utf8::DecodeError);
  CHECK(utf8::encode(utf8::decode("naïve")) == "naïve");
}

TEST_CASE("tag map parsing and aliases") {
  const TagMap m = TagMap::parse("native=bn,en=en");
  CHECK(m.find("bn") == LanguageTag::Native);
  CHECK(m.find("en") == LanguageTag::En);
  CHECK_FALSE(m.find("hi").has_value());
  CHECK(m.name(LanguageTag::Native) == "bn");
  CHECK(TagMap::parse(m.to_spec()) == m);

  const TagMap d = TagMap::defaults();
  CHECK(d.find("hi") == LanguageTag::Native);
  CHECK(d.find("native") == LanguageTag::Native);
  CHECK_THROWS(TagMap::parse("native=bn"));
  CHECK_THROWS(TagMap::parse("klingon=x,en=en,native=bn"));
}

TEST_CASE("parse corpus") {
  const TagMap m = TagMap::parse("native=bn,en=en");
  const Corpus c = parse_corpus("ami\tbn\ntomake\tbn\nlove\ten\n\n\ngo\ten\n", m);
  REQUIRE(c.instances.size() == 2);
  CHECK(c.instances[0].size() == 3);
  CHECK(c.instances[0].tokens[2].surface == "love");
  CHECK(*c.instances[0].tokens[2].gold == LanguageTag::En);
  CHECK(c.token_count() == 4);
  CHECK(parse_corpus(serialize_corpus(c, m), m) == c);

  SUBCASE("windows line endings") {
    const Corpus crlf = parse_corpus("ami\tbn\r\nlove\ten\r\n", m);
    REQUIRE(crlf.instances.size() == 1);
    CHECK(crlf.instances[0].tokens[1].surface == "love");
  }
  SUBCASE("unknown tag names the line") {
    try {
      parse_corpus("ami\tbn\nxyz\tfr\n", m);
      FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("missing tab") { CHECK_THROWS_AS(parse_corpus("ami bn\n", m), CorpusError); }
  SUBCASE("empty") { CHECK_THROWS_AS(parse_corpus("\n\n", m), CorpusError); }
}

TEST_CASE("untagged input skips blank lines") {
  const UntaggedInput in = parse_untagged("aam jam\n\n  \nami  tomake\n");
  REQUIRE(in.instances.size() == 2);
  CHECK(in.instances[0].size() == 2);
  CHECK_FALSE(in.instances[0].tokens[0].gold.has_value());
  CHECK(in.skipped_lines == std::vector<std::size_t>{2, 3});
}

TEST_CASE("char vocab and word encoding") {
  const CharVocab v({U'a', U'b', U'm'});
  CHECK(v.size() == 5);
  CHECK(v.id(U'a') == 2);
  CHECK(v.id(U'M') == 4);
  CHECK(v.id(U'z') == CharVocab::kUnk);

  const auto ids = encode_word("Mab?", v, 6);
  CHECK(ids == std::vector<int>{4, 2, 3, CharVocab::kUnk, 0, 0});
  CHECK(encoded_length(ids) == 4);
  CHECK(encode_word("abababab", v, 4).size() == 4);
  CHECK_THROWS(encode_word("", v, 3));

  const Corpus c = testing::cmi_fixture();
  const CharVocab built = build_char_vocab(c);
  CHECK(built.contains(U'a'));
  CHECK(std::find(built.chars().begin(), built.chars().end(), U'A') == built.chars().end());
  CHECK(std::is_sorted(built.chars().begin(), built.chars().end()));
  CHECK(build_char_vocab(c).hash() == built.hash());
  CHECK(CharVocab({U'a', U'b'}).hash() != CharVocab({U'b', U'a'}).hash());
}

TEST_CASE("cmi") {
  using testing::make_instance;
  constexpr auto N = LanguageTag::Native;
  constexpr auto E = LanguageTag::En;
  CHECK(cmi(make_instance({{"a", N}, {"b", N}})) == 0.0);
  CHECK(cmi(make_instance({{"a", E}})) == 0.0);
  CHECK(cmi(make_instance({{"a", N}, {"b", E}, {"c", N}, {"d", E}})) == doctest::Approx(50.0));

  Instance mixed = make_instance({{"a", N}, {"b", E}, {"c", E}});
  Instance flipped = mixed;
  for (Token& t : flipped.tokens) t.gold = flip(*t.gold);
  CHECK(cmi(mixed) == cmi(flipped));

  const Corpus c = testing::cmi_fixture();
  const auto expected = testing::cmi_fixture_expected();
  double sum = 0.0;
  for (std::size_t i = 0; i < c.instances.size(); ++i) {
    CHECK(cmi(c.instances[i]) == doctest::Approx(expected[i]).epsilon(1e-12));
    sum += expected[i];
  }
  const CorpusStats s = corpus_stats(c);
  CHECK(s.instances == 5);
  CHECK(s.native_tokens == 10);
  // "ami" twice, "Amar" case-folded.
  CHECK(s.unique_native_tokens == 9);
  CHECK(s.mean_cmi == doctest::Approx(sum / 5.0).epsilon(1e-12));
}

TEST_CASE("synthetic corpus") {
  SynthConfig cfg;
  cfg.train_instances = 200;
  cfg.dev_instances = 50;
  cfg.test_instances = 50;
  const SynthCorpora a = synth_corpus(cfg);
  const SynthCorpora b = synth_corpus(cfg);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.instances.size() == 200);
  CHECK(a.ambiguous_lexicon.size() == cfg.ambiguous_lexicon_size);

  std::size_t ambiguous = 0;
  std::size_t tokens = 0;
  for (const Instance& inst : a.train.instances) {
    CHECK(inst.size() == cfg.tokens_per_instance);
    std::size_t counts[2] = {0, 0};
    for (const Token& t : inst.tokens) ++counts[label_of(*t.gold)];
    const LanguageTag dominant = counts[0] > counts[1] ? LanguageTag::Native : LanguageTag::En;
    REQUIRE(counts[0] != counts[1]);
    for (const Token& t : inst.tokens) {
      ++tokens;
      if (a.ambiguous_lexicon.count(t.surface)) {
        ++ambiguous;
        CHECK(*t.gold == dominant);
      }
    }
  }
  const double rate = static_cast<double>(ambiguous) / static_cast<double>(tokens);
  CHECK(rate == doctest::Approx(cfg.ambiguity_rate).epsilon(0.2));

  std::set<LanguageTag> ambiguous_tags;
  for (const Instance& inst : a.train.instances) {
    for (const Token& t : inst.tokens) {
      if (a.ambiguous_lexicon.count(t.surface)) ambiguous_tags.insert(*t.gold);
    }
  }
  CHECK(ambiguous_tags.size() == 2);

  cfg.seed = 8;
  CHECK_FALSE(synth_corpus(cfg).train == a.train);
  cfg.ambiguity_rate = 1.5;
  CHECK_THROWS(synth_corpus(cfg));
}

TEST_CASE("corpus edge cases") {
  const TagMap m = TagMap::parse("native=bn,en=en");
  const Corpus one = parse_corpus("jam\ten\n\n", m);
  REQUIRE(one.instances.size() == 1);
  CHECK(one.token_count() == 1);
  CHECK(*one.instances[0].tokens[0].gold == LanguageTag::En);

  const Corpus fruit = parse_corpus("aam\tbn\njam\tbn\nkathal\tbn", m);
  REQUIRE(fruit.instances.size() == 1);
  CHECK(fruit.instances[0].size() == 3);
  const CorpusStats s = corpus_stats(fruit);
  CHECK(s.instances == 1);
  CHECK(s.native_tokens == 3);
  CHECK(s.unique_native_tokens == 3);
  CHECK(s.mean_cmi == 0.0);

  const CorpusStats dup = corpus_stats(parse_corpus("jam\tbn\njam\tbn\n", m));
  CHECK(dup.native_tokens == 2);
  CHECK(dup.unique_native_tokens == 1);

  const CorpusStats pairs = corpus_stats(parse_corpus("a\tbn\nb\ten\n\nc\tbn\nd\ten\n", m));
  CHECK(pairs.instances == 2);
  CHECK(pairs.native_tokens == 2);
  CHECK(pairs.mean_cmi == doctest::Approx(50.0));
}

TEST_CASE("vocab examples") {
  const TagMap m = TagMap::parse("native=bn,en=en");
  const CharVocab ab = build_char_vocab(parse_corpus("ab\tbn\n", m));
  CHECK(ab.size() == 4);
  CHECK(ab.id(U'a') == 2);
  CHECK(ab.id(U'b') == 3);
  CHECK(build_char_vocab(parse_corpus("Ab\tbn\n", m)) == ab);
  const CharVocab min2 = build_char_vocab(parse_corpus("aab\tbn\n", m), 2);
  CHECK(min2.id(U'b') == CharVocab::kUnk);
  CHECK(min2.id(U'a') == 2);

  CHECK(encode_word("ab", ab, 4) == std::vector<int>{2, 3, 0, 0});
  CHECK(encode_word("abab", ab, 2) == std::vector<int>{2, 3});
  CHECK(encode_word("ax", ab, 4) == std::vector<int>{2, 1, 0, 0});
}

TEST_CASE("cmi examples") {
  Instance en;
  for (int i = 0; i < 5; ++i) en.tokens.push_back({"x", LanguageTag::En});
  CHECK(cmi(en) == 0.0);
  Instance even = en;
  for (int i = 0; i < 5; ++i) even.tokens.push_back({"y", LanguageTag::Native});
  CHECK(cmi(even) == doctest::Approx(50.0));
  Instance six_four;
  for (int i = 0; i < 6; ++i) six_four.tokens.push_back({"y", LanguageTag::Native});
  for (int i = 0; i < 4; ++i) six_four.tokens.push_back({"x", LanguageTag::En});
  CHECK(cmi(six_four) == doctest::Approx(40.0));
}

TEST_CASE("synthetic ambiguity rate") {
  SynthConfig cfg;
  cfg.train_instances = 125;
  cfg.dev_instances = 1;
  cfg.test_instances = 1;
  cfg.ambiguity_rate = 0.5;
  const SynthCorpora c = synth_corpus(cfg);
  std::size_t amb = 0;
  for (const Instance& inst : c.train.instances) {
    for (const Token& t : inst.tokens) amb += c.ambiguous_lexicon.count(t.surface);
  }
  CHECK(c.train.token_count() == 1000);
  CHECK(amb / 1000.0 == doctest::Approx(0.5).epsilon(0.1));

  cfg.ambiguity_rate = 0.0;
  const SynthCorpora plain = synth_corpus(cfg);
  for (const Instance& inst : plain.train.instances) {
    for (const Token& t : inst.tokens) {
      const bool native_letters = t.surface.find_first_of("nopqrstuvwxyz") == std::string::npos;
      CHECK(native_letters == (*t.gold == LanguageTag::Native));
    }
  }
  const TagMap m = TagMap::defaults();
  CHECK(serialize_corpus(synth_corpus(cfg).train, m) == serialize_corpus(plain.train, m));
}
