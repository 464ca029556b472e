#include "cmlid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cmlid/utf8.hpp"

namespace cmlid {

std::uint64_t ConfusionMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

ConfusionMatrix ConfusionMatrix::from_counts(std::uint64_t native_as_native,
                                             std::uint64_t native_as_en,
                                             std::uint64_t en_as_native,
                                             std::uint64_t en_as_en) {
  ConfusionMatrix cm;
  cm.counts = {{{native_as_native, native_as_en}, {en_as_native, en_as_en}}};
  return cm;
}

ConfusionMatrix confusion(std::span<const LanguageTag> predicted,
                          std::span<const LanguageTag> gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(gold.size()) + " gold tags");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm.counts[label_of(gold[i])][label_of(predicted[i])];
  return cm;
}

namespace {

std::optional<double> percent(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm) {
  const std::uint64_t tp = cm.counts[0][0];  // NATIVE is positive
  const std::uint64_t fn = cm.counts[0][1];
  const std::uint64_t fp = cm.counts[1][0];
  Metrics m;
  m.accuracy = percent(cm.correct(), cm.total());
  m.precision = percent(tp, tp + fp);
  m.recall = percent(tp, tp + fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

double truncate_decimals(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The slack absorbs quotients such as 9433/100 landing just below the cut.
  const double scaled = value * scale;
  const double slack = 1e-9 * std::max(1.0, std::abs(scaled));
  return (value >= 0.0 ? std::floor(scaled + slack) : std::ceil(scaled - slack)) / scale;
}

Metrics reported_cells(const Metrics& raw) {
  auto cut = [](const std::optional<double>& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return truncate_decimals(*v);
  };
  Metrics out;
  out.accuracy = cut(raw.accuracy);
  out.precision = cut(raw.precision);
  out.recall = cut(raw.recall);
  if (out.precision && out.recall && (*out.precision + *out.recall) > 0.0) {
    out.f1 = truncate_decimals(2.0 * *out.precision * *out.recall /
                               (*out.precision + *out.recall));
  }
  return out;
}

std::string format_percent(const std::optional<double>& value) {
  if (!value) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *value);
  return buf;
}

std::vector<MetricDiscrepancy> reconcile(const Metrics& computed, const ReportedMetrics& reported,
                                         double tolerance) {
  const Metrics cells = reported_cells(computed);
  std::vector<MetricDiscrepancy> out;
  auto check = [&](const char* name, const std::optional<double>& value, double quoted) {
    if (!value || std::abs(*value - quoted) > tolerance + 1e-9) {
      out.push_back(MetricDiscrepancy{name, quoted, value ? *value : std::nan("")});
    }
  };
  check("accuracy", cells.accuracy, reported.accuracy);
  check("precision", cells.precision, reported.precision);
  check("recall", cells.recall, reported.recall);
  check("f1", cells.f1, reported.f1);
  return out;
}

std::size_t ModelComparison::total() const {
  return both_correct.size() + word_only_correct.size() + context_only_correct.size() +
         both_wrong.size();
}

namespace {

void check_alignment(const Corpus& gold, const TagSequences& preds, const char* what) {
  if (preds.size() != gold.instances.size()) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(preds.size()) +
                                " prediction sequences for " +
                                std::to_string(gold.instances.size()) + " instances");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != gold.instances[i].size()) {
      throw std::invalid_argument(std::string(what) + ": instance " + std::to_string(i) +
                                  " has " + std::to_string(preds[i].size()) +
                                  " predictions for " +
                                  std::to_string(gold.instances[i].size()) + " tokens");
    }
    for (const Token& tok : gold.instances[i].tokens) {
      if (!tok.gold) throw std::invalid_argument(std::string(what) + ": gold tags required");
    }
  }
}

}  // namespace

std::vector<LanguageTag> flatten(const Corpus& corpus, const TagSequences& preds) {
  check_alignment(corpus, preds, "flatten");
  std::vector<LanguageTag> out;
  for (const auto& seq : preds) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

std::vector<LanguageTag> gold_tags(const Corpus& corpus) {
  std::vector<LanguageTag> out;
  for (const Instance& inst : corpus.instances) {
    for (const Token& tok : inst.tokens) {
      if (!tok.gold) throw std::invalid_argument("gold_tags: untagged token");
      out.push_back(*tok.gold);
    }
  }
  return out;
}

ModelComparison compare_models(const Corpus& gold, const TagSequences& word_preds,
                               const TagSequences& context_preds) {
  check_alignment(gold, word_preds, "compare_models (word)");
  check_alignment(gold, context_preds, "compare_models (context)");
  ModelComparison out;
  for (std::size_t i = 0; i < gold.instances.size(); ++i) {
    const Instance& inst = gold.instances[i];
    for (std::size_t t = 0; t < inst.size(); ++t) {
      const LanguageTag g = *inst.tokens[t].gold;
      const bool word_ok = word_preds[i][t] == g;
      const bool context_ok = context_preds[i][t] == g;
      TokenRef ref{i, t, inst.tokens[t].surface, g};
      if (word_ok && context_ok) {
        out.both_correct.push_back(std::move(ref));
      } else if (word_ok) {
        out.word_only_correct.push_back(std::move(ref));
        --out.class_gain[label_of(g)];
      } else if (context_ok) {
        out.context_only_correct.push_back(std::move(ref));
        ++out.class_gain[label_of(g)];
      } else {
        out.both_wrong.push_back(std::move(ref));
      }
    }
  }
  return out;
}

std::size_t AmbiguityReport::word_correct() const {
  std::size_t n = 0;
  for (const auto& s : surfaces) n += s.word_correct;
  return n;
}
std::size_t AmbiguityReport::word_incorrect() const {
  std::size_t n = 0;
  for (const auto& s : surfaces) n += s.word_incorrect;
  return n;
}
std::size_t AmbiguityReport::context_correct() const {
  std::size_t n = 0;
  for (const auto& s : surfaces) n += s.context_correct;
  return n;
}
std::size_t AmbiguityReport::context_incorrect() const {
  std::size_t n = 0;
  for (const auto& s : surfaces) n += s.context_incorrect;
  return n;
}

AmbiguityReport ambiguity_report(const Corpus& gold, const TagSequences& word_preds,
                                 const TagSequences& context_preds) {
  check_alignment(gold, word_preds, "ambiguity_report (word)");
  check_alignment(gold, context_preds, "ambiguity_report (context)");
  std::map<std::string, std::array<bool, 2>> seen_tags;
  for (const Instance& inst : gold.instances) {
    for (const Token& tok : inst.tokens) {
      seen_tags[utf8::to_lower(tok.surface)][label_of(*tok.gold)] = true;
    }
  }
  std::map<std::string, AmbiguousSurface> by_surface;
  for (std::size_t i = 0; i < gold.instances.size(); ++i) {
    const Instance& inst = gold.instances[i];
    for (std::size_t t = 0; t < inst.size(); ++t) {
      std::string key = utf8::to_lower(inst.tokens[t].surface);
      const auto& tags = seen_tags.at(key);
      if (!(tags[0] && tags[1])) continue;
      AmbiguousSurface& entry = by_surface[key];
      entry.surface = key;
      const LanguageTag g = *inst.tokens[t].gold;
      entry.occurrences.push_back({i, t, g, word_preds[i][t], context_preds[i][t]});
      (word_preds[i][t] == g ? entry.word_correct : entry.word_incorrect)++;
      (context_preds[i][t] == g ? entry.context_correct : entry.context_incorrect)++;
    }
  }
  AmbiguityReport report;
  for (auto& [key, entry] : by_surface) report.surfaces.push_back(std::move(entry));
  return report;
}

std::string render_metrics_line(const Metrics& raw) {
  const Metrics m = reported_cells(raw);
  return format_percent(m.accuracy) + " / " + format_percent(m.precision) + " / " +
         format_percent(m.recall) + " / " + format_percent(m.f1);
}

std::string render_report(const std::vector<EvaluationRow>& rows, const TagMap& tag_map,
                          const ModelComparison* comparison, const AmbiguityReport* ambiguity) {
  std::ostringstream out;
  const std::string& native = tag_map.name(LanguageTag::Native);
  const std::string& en = tag_map.name(LanguageTag::En);
  char line[256];

  out << "Metrics (%, positive class = " << native << ")\n";
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s\n", "model", "Acc", "Prec", "Rec", "F1");
  out << line;
  for (const EvaluationRow& row : rows) {
    const Metrics m = reported_cells(metrics(row.confusion));
    std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s\n", row.name.c_str(),
                  format_percent(m.accuracy).c_str(), format_percent(m.precision).c_str(),
                  format_percent(m.recall).c_str(), format_percent(m.f1).c_str());
    out << line;
  }
  for (const EvaluationRow& row : rows) {
    out << "  " << row.name << ": " << render_metrics_line(metrics(row.confusion)) << "\n";
  }

  out << "\nConfusion matrices (rows = predicted, columns = gold)\n";
  for (const EvaluationRow& row : rows) {
    const auto& c = row.confusion.counts;
    out << row.name << "\n";
    std::snprintf(line, sizeof line, "  %-10s %10s %10s\n", "pred\\gold", native.c_str(), en.c_str());
    out << line;
    std::snprintf(line, sizeof line, "  %-10s %10llu %10llu\n", native.c_str(),
                  static_cast<unsigned long long>(c[0][0]), static_cast<unsigned long long>(c[1][0]));
    out << line;
    std::snprintf(line, sizeof line, "  %-10s %10llu %10llu\n", en.c_str(),
                  static_cast<unsigned long long>(c[0][1]), static_cast<unsigned long long>(c[1][1]));
    out << line;
  }

  if (comparison) {
    out << "\nWord vs context model\n";
    out << "  both correct:         " << comparison->both_correct.size() << "\n";
    out << "  only word correct:    " << comparison->word_only_correct.size() << "\n";
    out << "  only context correct: " << comparison->context_only_correct.size() << "\n";
    out << "  both wrong:           " << comparison->both_wrong.size() << "\n";
    out << "  net gain on " << native << " tokens: " << comparison->class_gain[0] << "\n";
    out << "  net gain on " << en << " tokens: " << comparison->class_gain[1] << "\n";
    std::size_t shown = 0;
    if (!comparison->context_only_correct.empty()) out << "  fixed by context:";
    for (const TokenRef& ref : comparison->context_only_correct) {
      if (shown++ == 20) {
        out << " ...";
        break;
      }
      out << " " << ref.surface << "/" << tag_map.name(ref.gold);
    }
    if (shown) out << "\n";
  }

  if (ambiguity) {
    out << "\nAmbiguous surfaces (seen with both gold tags): " << ambiguity->surfaces.size()
        << "\n";
    out << "  word model:    " << ambiguity->word_correct() << " correct, "
        << ambiguity->word_incorrect() << " incorrect\n";
    out << "  context model: " << ambiguity->context_correct() << " correct, "
        << ambiguity->context_incorrect() << " incorrect\n";
    for (const AmbiguousSurface& s : ambiguity->surfaces) {
      out << "  " << s.surface << ": " << s.occurrences.size() << " occurrences, word "
          << s.word_correct << "/" << s.occurrences.size() << ", context " << s.context_correct
          << "/" << s.occurrences.size() << "\n";
    }
  }
  return out.str();
}

}  // namespace cmlid
