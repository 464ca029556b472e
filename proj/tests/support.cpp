#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <functional>

#include "cmlid/context_model.hpp"
#include "cmlid/crf.hpp"
#include "cmlid/layers.hpp"

namespace testing {

using namespace cmlid;

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  require_shape(b, a.shape(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

void zero_all(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

std::vector<GradCheckTarget> param_targets(const std::vector<Parameter*>& params) {
  std::vector<GradCheckTarget> out;
  for (Parameter* p : params) out.push_back({p->name, &p->value, &p->grad});
  return out;
}

NamedReport run(std::string layer, const std::function<double()>& loss,
                const std::vector<GradCheckTarget>& targets) {
  return {std::move(layer), grad_check(loss, targets)};
}

// Per-coordinate checks on whole stacked models run into coordinates whose
// gradient is near 1e-10, below what central differences resolve; a
// directional derivative over all parameters stays well conditioned.
// Compares g . v with the central difference of loss along v, for random unit
// directions v over all parameters at once.
NamedReport run_directional(std::string name, const std::function<double()>& loss,
                            const std::vector<Parameter*>& params, Rng& rng,
                            std::size_t directions = 8) {
  NamedReport out{std::move(name), {}};
  const double eps = 1e-5;
  for (std::size_t d = 0; d < directions; ++d) {
    std::vector<Tensor> dir;
    double norm = 0.0;
    for (Parameter* p : params) {
      dir.push_back(random_tensor(p->value.shape(), rng));
      norm += dot(dir.back(), dir.back());
    }
    norm = std::sqrt(norm);
    double analytic = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (double& v : dir[i].data()) v /= norm;
      analytic += dot(params[i]->grad, dir[i]);
    }
    auto shift = [&](double t) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i]->value.data();
        for (std::size_t k = 0; k < values.size(); ++k) values[k] += t * dir[i][k];
      }
    };
    shift(eps);
    const double plus = loss();
    shift(-2.0 * eps);
    const double minus = loss();
    shift(eps);
    const double err = relative_error(analytic, (plus - minus) / (2.0 * eps));
    ++out.report.coordinates;
    if (out.report.worst_target.empty() || err > out.report.max_relative_error) {
      out.report.max_relative_error = err;
      out.report.worst_target = "direction";
      out.report.worst_index = d;
    }
  }
  return out;
}

std::vector<int> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<int> ids(n);
  for (int& id : ids) id = static_cast<int>(1 + rng.below(vocab - 1));
  return ids;
}

}  // namespace

NamedReport check_embedding(std::uint64_t seed) {
  Rng rng(seed);
  Embedding layer(7, 4);
  layer.init(rng);
  const std::vector<int> ids{3, 1, 3, 6, 0};
  const Tensor w = random_tensor({ids.size(), 4}, rng);
  zero_all(layer.parameters());
  layer.backward(ids, w);
  return run("embedding", [&] { return dot(layer.forward(ids), w); },
             param_targets(layer.parameters()));
}

NamedReport check_conv1d(std::uint64_t seed, Activation activation) {
  Rng rng(seed);
  Conv1D layer(3, 4, 3, activation);
  layer.init(rng);
  Tensor x = random_tensor({7, 3}, rng);
  const Tensor w = random_tensor({5, 4}, rng);
  zero_all(layer.parameters());
  Conv1DCache cache;
  layer.forward(x, &cache);
  const Tensor dx = layer.backward(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  return run(activation == Activation::Relu ? "conv1d(relu)" : "conv1d",
             [&] { return dot(layer.forward(x), w); }, targets);
}

NamedReport check_maxpool(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor({9, 3}, rng);
  const Tensor w = random_tensor({4, 3}, rng);
  MaxPoolCache cache;
  maxpool1d_forward(x, 2, &cache);
  const Tensor dx = maxpool1d_backward(cache, w);
  const std::vector<GradCheckTarget> targets{{"input", &x, &dx}};
  return run("maxpool1d", [&] { return dot(maxpool1d_forward(x, 2), w); }, targets);
}

NamedReport check_dropout(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor({6, 3}, rng);
  const Tensor w = random_tensor({6, 3}, rng);
  const Rng mask_rng = rng;
  Rng first = mask_rng;
  DropoutCache cache;
  dropout_forward(x, 0.3, Mode::Train, &first, &cache);
  const Tensor dx = dropout_backward(cache, w);
  const std::vector<GradCheckTarget> targets{{"input", &x, &dx}};
  return run("dropout",
             [&] {
               Rng again = mask_rng;
               return dot(dropout_forward(x, 0.3, Mode::Train, &again), w);
             },
             targets);
}

NamedReport check_dense(std::uint64_t seed, Activation activation) {
  Rng rng(seed);
  Dense layer(5, 3, activation);
  layer.init(rng);
  Tensor x = random_tensor({4, 5}, rng);
  const Tensor w = random_tensor({4, 3}, rng);
  zero_all(layer.parameters());
  DenseCache cache;
  layer.forward(x, &cache);
  const Tensor dx = layer.backward(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  const char* names[] = {"dense(identity)", "dense(relu)", "dense(sigmoid)", "dense(tanh)"};
  return run(names[static_cast<int>(activation)], [&] { return dot(layer.forward(x), w); },
             targets);
}

NamedReport check_lstm(std::uint64_t seed) {
  Rng rng(seed);
  Lstm layer(3, 4);
  layer.init(rng);
  Tensor x = random_tensor({5, 3}, rng);
  const Tensor w = random_tensor({5, 4}, rng);
  zero_all(layer.parameters());
  LstmCache cache;
  layer.forward(x, &cache);
  const Tensor dx = layer.backward(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  return run("lstm", [&] { return dot(layer.forward(x), w); }, targets);
}

NamedReport check_lstm_last(std::uint64_t seed) {
  Rng rng(seed);
  Lstm layer(3, 4);
  layer.init(rng);
  Tensor x = random_tensor({6, 3}, rng);
  const Tensor w = random_tensor({4}, rng);
  zero_all(layer.parameters());
  LstmCache cache;
  layer.forward_last(x, &cache);
  const Tensor dx = layer.backward_last(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  return run("lstm(last state)", [&] { return dot(layer.forward_last(x), w); }, targets);
}

NamedReport check_bilstm(std::uint64_t seed) {
  Rng rng(seed);
  BiLstm layer(3, 4);
  layer.init(rng);
  Tensor x = random_tensor({5, 3}, rng);
  const Tensor w = random_tensor({5, 8}, rng);
  zero_all(layer.parameters());
  BiLstmCache cache;
  layer.forward(x, &cache);
  const Tensor dx = layer.backward(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  return run("bilstm", [&] { return dot(layer.forward(x), w); }, targets);
}

NamedReport check_bilstm_summary(std::uint64_t seed) {
  Rng rng(seed);
  BiLstm layer(3, 4);
  layer.init(rng);
  Tensor x = random_tensor({5, 3}, rng);
  const Tensor w = random_tensor({8}, rng);
  zero_all(layer.parameters());
  BiLstmCache cache;
  layer.forward_summary(x, &cache);
  const Tensor dx = layer.backward_summary(cache, w);
  auto targets = param_targets(layer.parameters());
  targets.push_back({"input", &x, &dx});
  return run("bilstm(summary)", [&] { return dot(layer.forward_summary(x), w); }, targets);
}

NamedReport check_char_encoder(std::uint64_t seed) {
  Rng rng(seed);
  CharEncoder layer(9, 4, 3);
  layer.init(rng);
  const std::vector<int> ids = random_ids(6, 9, rng);
  const Tensor w = random_tensor({6}, rng);
  zero_all(layer.parameters());
  CharEncoderCache cache;
  layer.forward(ids, &cache);
  layer.backward(cache, w);
  return run("char encoder", [&] { return dot(layer.forward(ids), w); },
             param_targets(layer.parameters()));
}

NamedReport check_crf_nll(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t labels = 3;
  Tensor emissions = random_tensor({5, labels}, rng, -2.0, 2.0);
  Tensor transitions = random_tensor({labels + 2, labels + 2}, rng, -1.0, 1.0);
  std::vector<int> gold(5);
  for (int& g : gold) g = static_cast<int>(rng.below(labels));
  const crf::NllResult r = crf::nll(emissions, transitions, gold);
  const std::vector<GradCheckTarget> targets{{"emissions", &emissions, &r.d_emissions},
                                             {"transitions", &transitions, &r.d_transitions}};
  return run("crf nll", [&] { return crf::nll(emissions, transitions, gold).loss; }, targets);
}

NamedReport check_word_model(std::uint64_t seed) {
  WordModelConfig config;
  config.char_dim = 4;
  config.filters_per_channel = 3;
  config.lstm_sizes = {3, 4};
  config.dense_sizes = {5, 1};
  config.max_len = 8;
  config.dropout = 0.2;
  config.seed = seed;
  WordModel model(config, 10);
  Rng rng(seed + 1);
  std::vector<int> ids = random_ids(6, 10, rng);
  ids.resize(8, CharVocab::kPad);
  const Rng mask_rng = rng;
  const int label = 1;

  zero_all(model.parameters());
  Rng first = mask_rng;
  WordForwardState state;
  const double p = model.forward(ids, Mode::Train, &first, &state);
  model.backward(state, bce_loss(p, label).grad);
  return run_directional("word model (mnn)",
             [&] {
               Rng again = mask_rng;
               return bce_loss(model.forward(ids, Mode::Train, &again), label).loss;
             },
             model.parameters(), rng);
}

NamedReport check_baseline_model(std::uint64_t seed) {
  WordModelConfig config;
  config.char_dim = 4;
  config.max_len = 6;
  config.seed = seed;
  BaselineModel model(config, 8);
  Rng rng(seed + 1);
  std::vector<int> ids = random_ids(4, 8, rng);
  ids.resize(6, CharVocab::kPad);
  zero_all(model.parameters());
  Rng unused(0);
  model.accumulate(ids, 0, 1.0, unused);
  return run_directional("baseline model", [&] { return bce_loss(model.score(ids), 0).loss; },
             model.parameters(), rng);
}

NamedReport check_context_model(std::uint64_t seed) {
  ContextModelConfig config;
  config.char_dim = 3;
  config.char_hidden = 2;
  config.bilstm_hidden = 3;
  config.seed = seed;
  ContextModel model(config, 8);
  Rng rng(seed + 1);
  EncodedInstance inst;
  for (std::size_t t = 0; t < 4; ++t) {
    inst.chars.push_back(random_ids(1 + rng.below(4), 8, rng));
    inst.word_scores.push_back(rng.uniform());
    inst.gold.push_back(static_cast<int>(rng.below(2)));
  }
  zero_all(model.parameters());
  model.accumulate(inst);
  return run_directional("context model",
             [&] {
               return crf::nll(model.forward(inst), model.transitions.value, inst.gold).loss;
             },
             model.parameters(), rng);
}

std::vector<NamedReport> gradient_suite(std::uint64_t seed) {
  return {
      check_embedding(seed),
      check_conv1d(seed, Activation::Relu),
      check_conv1d(seed, Activation::Tanh),
      check_maxpool(seed),
      check_dropout(seed),
      check_dense(seed, Activation::Identity),
      check_dense(seed, Activation::Relu),
      check_dense(seed, Activation::Sigmoid),
      check_dense(seed, Activation::Tanh),
      check_lstm(seed),
      check_lstm_last(seed),
      check_bilstm(seed),
      check_bilstm_summary(seed),
      check_char_encoder(seed),
      check_crf_nll(seed),
  };
}

Threshold brute_force_threshold(std::span<const double> scores, std::span<const LanguageTag> labels,
                                int grid) {
  std::vector<std::size_t> correct(static_cast<std::size_t>(grid) + 1, 0);
  for (int k = 0; k <= grid; ++k) {
    const double theta = static_cast<double>(k) / grid;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool says_native = !(scores[i] > theta);
      if (says_native == (labels[i] == LanguageTag::Native)) ++correct[k];
    }
  }
  int best = grid;
  for (int k = grid; k >= 0; --k) {
    if (correct[k] > correct[best]) best = k;
  }
  return {static_cast<double>(best) / grid,
          static_cast<double>(correct[best]) / static_cast<double>(scores.size())};
}

const std::array<PublishedMatrix, 4>& published_matrices() {
  static const std::array<PublishedMatrix, 4> tables{{
      {"Bn word model", {16502, 1465, 991, 15521}, {92.87, 94.33, 91.84, 93.06}},
      {"Bn context model", {16652, 1315, 1000, 15512}, {93.28, 94.33, 92.68, 93.49}},
      {"Hi word model", {14788, 1326, 1034, 14968}, {92.65, 93.54, 91.77, 92.64}},
      {"Hi context model", {14992, 1122, 1021, 14981}, {93.32, 93.62, 93.03, 93.32}},
  }};
  return tables;
}

Instance make_instance(std::initializer_list<std::pair<const char*, LanguageTag>> tokens) {
  Instance inst;
  for (const auto& [surface, tag] : tokens) inst.tokens.push_back({surface, tag});
  return inst;
}

Corpus cmi_fixture() {
  constexpr auto N = LanguageTag::Native;
  constexpr auto E = LanguageTag::En;
  Corpus c;
  c.instances = {
      make_instance({{"ami", N}, {"bhat", N}, {"khai", N}}),
      make_instance({{"ami", N}, {"office", E}}),
      make_instance({{"this", E}, {"is", E}, {"a", E}, {"jam", N}}),
      make_instance({{"Amar", N}, {"shob", N}, {"fruit", E}, {"like", E}, {"aam", N}}),
      make_instance({{"go", E}, {"home", E}, {"now", E}, {"please", E}, {"ekhon", N},
                     {"jao", N}}),
  };
  return c;
}

// 100 * (1 - dominant / n) per instance, by hand.
std::vector<double> cmi_fixture_expected() {
  return {0.0, 50.0, 25.0, 40.0, 100.0 / 3.0};
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cmlid_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testing
