#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmlid/corpus.hpp"
#include "cmlid/eval.hpp"
#include "cmlid/grad_check.hpp"
#include "cmlid/rng.hpp"
#include "cmlid/tensor.hpp"
#include "cmlid/word_model.hpp"

namespace testing {

cmlid::Tensor random_tensor(const cmlid::Shape& shape, cmlid::Rng& rng, double lo = -1.0,
                            double hi = 1.0);
double dot(const cmlid::Tensor& a, const cmlid::Tensor& b);

struct NamedReport {
  std::string layer;
  cmlid::GradCheckReport report;
};

// Finite-difference checks of every layer's backward pass against its
// forward pass, at small random sizes.
NamedReport check_embedding(std::uint64_t seed);
NamedReport check_conv1d(std::uint64_t seed, cmlid::Activation activation);
NamedReport check_maxpool(std::uint64_t seed);
NamedReport check_dropout(std::uint64_t seed);
NamedReport check_dense(std::uint64_t seed, cmlid::Activation activation);
NamedReport check_lstm(std::uint64_t seed);
NamedReport check_lstm_last(std::uint64_t seed);
NamedReport check_bilstm(std::uint64_t seed);
NamedReport check_bilstm_summary(std::uint64_t seed);
NamedReport check_char_encoder(std::uint64_t seed);
NamedReport check_crf_nll(std::uint64_t seed);

// Whole models, checked along random directions in parameter space.
NamedReport check_word_model(std::uint64_t seed);
NamedReport check_baseline_model(std::uint64_t seed);
NamedReport check_context_model(std::uint64_t seed);

// Every layer-level check above.
std::vector<NamedReport> gradient_suite(std::uint64_t seed);

// Independent grid maximizer: counts correct decisions for each theta = k/grid
// and returns the largest theta among the best counts.
cmlid::Threshold brute_force_threshold(std::span<const double> scores,
                                       std::span<const cmlid::LanguageTag> labels,
                                       int grid = 100);

// Published confusion counts (native-as-native, native-as-en, en-as-native,
// en-as-en) and the metric rows printed for them.
struct PublishedMatrix {
  const char* name;
  std::array<std::uint64_t, 4> counts;
  cmlid::ReportedMetrics row;
};
const std::array<PublishedMatrix, 4>& published_matrices();

// Hand-tagged fixture with known per-instance CMI values.
cmlid::Corpus cmi_fixture();
std::vector<double> cmi_fixture_expected();

cmlid::Instance make_instance(
    std::initializer_list<std::pair<const char*, cmlid::LanguageTag>> tokens);

std::string temp_dir(const std::string& name);

}  // namespace testing
