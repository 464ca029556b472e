#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmlid/corpus.hpp"

namespace cmlid {

// counts[gold][pred], indexed by label (NATIVE = 0, EN = 1).
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  std::uint64_t at(LanguageTag gold, LanguageTag pred) const {
    return counts[label_of(gold)][label_of(pred)];
  }
  std::uint64_t total() const;
  std::uint64_t correct() const { return counts[0][0] + counts[1][1]; }

  static ConfusionMatrix from_counts(std::uint64_t native_as_native, std::uint64_t native_as_en,
                                     std::uint64_t en_as_native, std::uint64_t en_as_en);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const LanguageTag> predicted,
                          std::span<const LanguageTag> gold);

// Percentages with NATIVE as the positive class. A metric whose denominator
// is zero is undefined (nullopt), which is distinct from 0.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Metrics metrics(const ConfusionMatrix& cm);

// Reporting convention for percentages: each cell is cut (not rounded) to
// two decimals, and the F1 cell is the harmonic mean of the reported
// precision and recall cells, cut the same way.
double truncate_decimals(double value, int decimals = 2);
Metrics reported_cells(const Metrics& raw);

// "92.87", or "undef" for an undefined metric. The value is printed as given.
std::string format_percent(const std::optional<double>& value);

// A metrics row quoted from elsewhere, for reconciling against recomputation.
struct ReportedMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
};

struct MetricDiscrepancy {
  std::string metric;
  double reported;
  double computed;  // reported_cells() value
};

// Cells where the recomputed report cell differs from the quoted one by more
// than tolerance percentage points.
std::vector<MetricDiscrepancy> reconcile(const Metrics& computed, const ReportedMetrics& reported,
                                         double tolerance = 0.01);

struct TokenRef {
  std::size_t instance = 0;
  std::size_t position = 0;
  std::string surface;
  LanguageTag gold = LanguageTag::Native;
};

// Token-level agreement between the word-only and full-pipeline tags.
struct ModelComparison {
  std::vector<TokenRef> both_correct;
  std::vector<TokenRef> word_only_correct;
  std::vector<TokenRef> context_only_correct;
  std::vector<TokenRef> both_wrong;
  // Context-model correct count minus word-model correct count, per gold class.
  std::array<std::int64_t, 2> class_gain{};

  std::size_t total() const;
};

using TagSequences = std::vector<std::vector<LanguageTag>>;

ModelComparison compare_models(const Corpus& gold, const TagSequences& word_preds,
                               const TagSequences& context_preds);

struct AmbiguousOccurrence {
  std::size_t instance = 0;
  std::size_t position = 0;
  LanguageTag gold = LanguageTag::Native;
  LanguageTag word_pred = LanguageTag::Native;
  LanguageTag context_pred = LanguageTag::Native;
};

struct AmbiguousSurface {
  std::string surface;  // case-folded
  std::vector<AmbiguousOccurrence> occurrences;
  std::size_t word_correct = 0;
  std::size_t word_incorrect = 0;
  std::size_t context_correct = 0;
  std::size_t context_incorrect = 0;
};

struct AmbiguityReport {
  std::vector<AmbiguousSurface> surfaces;  // sorted by surface

  std::size_t word_correct() const;
  std::size_t word_incorrect() const;
  std::size_t context_correct() const;
  std::size_t context_incorrect() const;
};

// Surfaces that occur with both gold tags, and how each model fared on them.
AmbiguityReport ambiguity_report(const Corpus& gold, const TagSequences& word_preds,
                                 const TagSequences& context_preds);

struct EvaluationRow {
  std::string name;
  ConfusionMatrix confusion;
};

// Metrics table, confusion matrices (predicted class as rows) and, when both
// word and context predictions are given, the delta and ambiguity sections.
std::string render_report(const std::vector<EvaluationRow>& rows, const TagMap& tag_map,
                          const ModelComparison* comparison = nullptr,
                          const AmbiguityReport* ambiguity = nullptr);

std::string render_metrics_line(const Metrics& m);  // "92.87 / 94.33 / 91.84 / 93.06"

// Flattens per-instance tags, checking alignment with the corpus.
std::vector<LanguageTag> flatten(const Corpus& corpus, const TagSequences& preds);
std::vector<LanguageTag> gold_tags(const Corpus& corpus);

}  // namespace cmlid
