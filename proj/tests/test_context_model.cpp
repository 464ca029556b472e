#include <doctest.h>

#include "cmlid/context_model.hpp"
#include "cmlid/crf.hpp"
#include "support.hpp"

using namespace cmlid;

namespace {

struct SmallWorld {
  SynthCorpora corpora;
  CharVocab vocab;
  std::unique_ptr<WordScorer> word;
};

SmallWorld small_world() {
  SynthConfig synth;
  synth.train_instances = 120;
  synth.dev_instances = 40;
  synth.test_instances = 40;
  SmallWorld w{synth_corpus(synth), {}, {}};
  w.vocab = build_char_vocab(w.corpora.train);
  WordModelConfig cfg;
  w.word = make_word_scorer("mnn", cfg, w.vocab.size());
  return w;
}

ContextModelConfig small_config() {
  ContextModelConfig cfg;
  cfg.char_dim = 8;
  cfg.char_hidden = 5;
  cfg.bilstm_hidden = 10;
  cfg.epochs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("context model features and emissions") {
  const SmallWorld w = small_world();
  const ContextModelConfig cfg;
  CHECK(cfg.feature_dim() == 31);
  ContextModel model(cfg, w.vocab.size());
  const Instance& inst = w.corpora.train.instances[0];
  const EncodedInstance enc = encode_instance(inst, *w.word, w.vocab, cfg.max_word_len);
  REQUIRE(enc.size() == inst.size());
  CHECK(enc.word_scores[0] == w.word->score(encode_word(inst.tokens[0].surface, w.vocab)));
  CHECK(enc.gold[0] == label_of(*inst.tokens[0].gold));

  const Tensor f = model.features(enc);
  CHECK(f.shape() == Shape{inst.size(), 31});
  CHECK(f.at(2, 0) == enc.word_scores[2]);
  CHECK(extract_features(model, *w.word, w.vocab, inst) == f);
  CHECK(model.forward(enc).shape() == Shape{inst.size(), 2});
  CHECK(context_forward(model, f) == model.forward(enc));
  CHECK(model.decode(enc).size() == inst.size());
  CHECK(model.transitions.value.shape() == Shape{4, 4});
}

TEST_CASE("context model gradient") {
  CHECK(testing::check_context_model(5).report.max_relative_error < 1e-4);
}

TEST_CASE("context training leaves the word model alone and is deterministic") {
  const SmallWorld w = small_world();
  const std::uint64_t before = w.word->checksum();
  ContextModel a(small_config(), w.vocab.size());
  ContextModel b(small_config(), w.vocab.size());
  std::vector<ContextEpochRecord> seen;
  const auto ra = train_context_model(a, *w.word, w.corpora.train, w.corpora.dev, w.vocab,
                                      [&](const ContextEpochRecord& r) { seen.push_back(r); });
  train_context_model(b, *w.word, w.corpora.train, w.corpora.dev, w.vocab);
  CHECK(w.word->checksum() == before);
  CHECK(parameter_checksum(a.parameters()) == parameter_checksum(b.parameters()));
  REQUIRE(ra.history.size() == 2);
  CHECK(seen.size() == 2);
  CHECK(ra.history[0].learning_rate == doctest::Approx(0.015));
  CHECK(ra.history[1].learning_rate == doctest::Approx(0.015 / 1.05));
  CHECK(ra.history[0].improved);
  CHECK(ra.best_epoch >= 1);
  CHECK(history_csv(ra.history).find("epoch,") == 0);
}

TEST_CASE("frozen transitions stay put") {
  const SmallWorld w = small_world();
  ContextModelConfig cfg = small_config();
  cfg.train_transitions = false;
  cfg.epochs = 1;
  ContextModel m(cfg, w.vocab.size());
  const Tensor before = m.transitions.value;
  train_context_model(m, *w.word, w.corpora.train, w.corpora.dev, w.vocab);
  CHECK(m.transitions.value == before);
  CHECK(m.trainable_parameters().size() + 1 == m.parameters().size());
}

TEST_CASE("context config validation") {
  ContextModelConfig cfg;
  cfg.labels = 3;
  CHECK_THROWS(cfg.validate());
  cfg = ContextModelConfig{};
  cfg.optimizer = OptimizerConfig::adam_defaults();
  CHECK_THROWS(cfg.validate());
  cfg = ContextModelConfig{};
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.batch == 16);
  CHECK(cfg.epochs == 210);
}

TEST_CASE("context feature examples") {
  const SmallWorld w = small_world();
  ContextModel model(ContextModelConfig{}, w.vocab.size());
  Instance one;
  one.tokens.push_back({"abc", LanguageTag::Native});
  const Tensor f1 = extract_features(model, *w.word, w.vocab, one);
  CHECK(f1.shape() == Shape{1, 31});
  CHECK(context_forward(model, f1).shape() == Shape{1, 2});

  Instance twice;
  twice.tokens = {{"jam", LanguageTag::Native}, {"xyz", LanguageTag::En},
                  {"jam", LanguageTag::En}};
  const Tensor f = extract_features(model, *w.word, w.vocab, twice);
  for (std::size_t k = 0; k < 31; ++k) CHECK(f.at(0, k) == f.at(2, k));

  ContextModel zeroed(ContextModelConfig{}, w.vocab.size());
  for (Parameter* p : zeroed.char_encoder.parameters()) p->value.zero();
  const Tensor fz = extract_features(zeroed, *w.word, w.vocab, twice);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(fz.at(t, 0) > 0.0);
    for (std::size_t k = 1; k < 31; ++k) CHECK(fz.at(t, k) == 0.0);
  }

  Rng rng(4);
  const Tensor seq = testing::random_tensor({5, 31}, rng);
  Tensor rev({5, 31});
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t k = 0; k < 31; ++k) rev.at(t, k) = seq.at(4 - t, k);
  }
  const Tensor a = context_forward(model, seq);
  const Tensor b = context_forward(model, rev);
  bool differs = false;
  for (std::size_t t = 0; t < 5; ++t) differs |= a.at(t, 0) != b.at(4 - t, 0);
  CHECK(differs);
}

TEST_CASE("context history is reproducible") {
  const SmallWorld w = small_world();
  ContextModel a(small_config(), w.vocab.size());
  ContextModel b(small_config(), w.vocab.size());
  const auto ha = train_context_model(a, *w.word, w.corpora.train, w.corpora.dev, w.vocab);
  const auto hb = train_context_model(b, *w.word, w.corpora.train, w.corpora.dev, w.vocab);
  CHECK(history_csv(ha.history) == history_csv(hb.history));
}
