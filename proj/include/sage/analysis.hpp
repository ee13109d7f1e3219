// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scoring of evaluation records, agreement statistics, human correlation and
// temperature sweeps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/error.hpp"
#include "sage/gateway.hpp"
#include "sage/metric.hpp"
#include "sage/parallel.hpp"
#include "sage/paraphrase_stage.hpp"
#include "sage/text.hpp"

namespace sage {

enum class Metric { kBleu, kRougeL, kSemanticCons, kSage };
enum class Target { kAnswers, kRots };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kBleu: return "bleu";
    case Metric::kRougeL: return "rouge-l";
    case Metric::kSemanticCons: return "semantic-cosine-cons";
    case Metric::kSage: return "sage";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "bleu") return Metric::kBleu;
  if (s == "rouge-l" || s == "rouge") return Metric::kRougeL;
  if (s == "semantic-cosine-cons" || s == "semantic-cosine") return Metric::kSemanticCons;
  if (s == "sage") return Metric::kSage;
  throw InputError("unknown metric '" + std::string(s) + "'");
}

inline std::string_view to_string(Target t) { return t == Target::kAnswers ? "answers" : "rots"; }

inline Target parse_target(std::string_view s) {
  if (s == "answers") return Target::kAnswers;
  if (s == "rots") return Target::kRots;
  throw InputError("unknown target '" + std::string(s) + "'");
}

inline const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> m{Metric::kBleu, Metric::kRougeL, Metric::kSemanticCons, Metric::kSage};
  return m;
}

inline bool needs_embeddings(std::span<const Metric> metrics) {
  return std::any_of(metrics.begin(), metrics.end(),
                     [](Metric m) { return m == Metric::kSemanticCons || m == Metric::kSage; });
}

using MetricScores = std::vector<std::pair<Metric, double>>;

/// Scores one set of n >= 2 texts. `embeddings` must be index-aligned with
/// `texts` when an embedding metric is requested.
inline MetricScores score_texts(std::span<const std::string> texts, std::span<const Metric> metrics,
                                std::span<const EmbeddingVector> embeddings = {}) {
  if (texts.size() < 2) throw InputError("need at least 2 texts to score, got " + std::to_string(texts.size()));
  if (needs_embeddings(metrics) && embeddings.size() != texts.size()) {
    throw InputError("missing embeddings for " + std::to_string(texts.size() - std::min(texts.size(), embeddings.size())) +
                     " texts");
  }
  MetricScores out;
  for (Metric m : metrics) {
    double s = 0.0;
    switch (m) {
      case Metric::kBleu: s = pairwise_consistency(texts, SimilarityBackend::lexical_bleu()); break;
      case Metric::kRougeL: s = pairwise_consistency(texts, SimilarityBackend::lexical_rouge_l()); break;
      case Metric::kSemanticCons: {
        std::unordered_map<std::string_view, std::size_t> index;
        for (std::size_t i = 0; i < texts.size(); ++i) index.emplace(texts[i], i);
        auto backend = SimilarityBackend::semantic_cosine(
            [&](std::string_view t) { return embeddings[index.at(t)]; });
        s = pairwise_consistency(texts, backend);
        break;
      }
      case Metric::kSage: s = sage_score(build_semantic_graph(embeddings)).sage; break;
    }
    out.emplace_back(m, s);
  }
  return out;
}

/// Returns the embedding of a text, or nullptr when unavailable.
using EmbeddingLookup = std::function<const EmbeddingVector*(std::string_view)>;

inline const std::vector<std::string>& target_texts(const ResponseSet& rs, Target target) {
  return target == Target::kAnswers ? rs.answers : rs.rots;
}

inline MetricScores evaluate_question(const EvaluationRecord& record, std::string_view model_label, Target target,
                                      std::span<const Metric> metrics, const EmbeddingLookup& lookup) {
  const ResponseSet* rs = record.find(model_label);
  if (!rs) throw InputError("no responses from '" + std::string(model_label) + "'");
  const auto& texts = target_texts(*rs, target);
  if (texts.size() < 2) {
    throw InputError("fewer than 2 " + std::string(to_string(target)) + " (" + std::to_string(texts.size()) + ")");
  }
  std::vector<EmbeddingVector> emb;
  if (needs_embeddings(metrics)) {
    if (!lookup) throw InputError("missing embeddings: no embedding source");
    emb.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const EmbeddingVector* v = lookup(texts[i]);
      if (!v) throw InputError("missing embedding for " + std::string(to_string(target)) + " " + std::to_string(i));
      emb.push_back(*v);
    }
  }
  return score_texts(texts, metrics, emb);
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string model;
  Target target = Target::kAnswers;
  Metric metric = Metric::kSage;
  std::string question_id;
  double score = 0.0;
};

struct AggregateRow {
  std::string model;
  Target target = Target::kAnswers;
  Metric metric = Metric::kSage;
  double mean = 0.0;
  std::size_t count = 0;
};

struct SkipRow {
  std::string question_id;
  std::string model;
  std::string target;
  std::string reason;
};

struct ConsistencyReport {
  std::vector<ReportRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<SkipRow> skipped;
};

struct ReportOptions {
  std::vector<std::string> models;  // response-set labels; empty = every label present
  std::vector<Target> targets{Target::kAnswers, Target::kRots};
  std::vector<Metric> metrics = all_metrics();
  std::size_t threads = 1;
};

/// Arithmetic means over rows, grouped by (model, target, metric).
inline std::vector<AggregateRow> aggregate_rows(std::span<const ReportRow> rows) {
  std::map<std::tuple<std::string, int, int>, std::pair<double, std::size_t>> acc;
  std::vector<const ReportRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  // Summation order fixed by question id so the mean does not depend on row order.
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ReportRow* a, const ReportRow* b) { return a->question_id < b->question_id; });
  for (const auto* r : sorted) {
    auto& [sum, n] = acc[{r->model, static_cast<int>(r->target), static_cast<int>(r->metric)}];
    sum += r->score;
    ++n;
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, v] : acc) {
    out.push_back({std::get<0>(key), static_cast<Target>(std::get<1>(key)), static_cast<Metric>(std::get<2>(key)),
                   v.first / static_cast<double>(v.second), v.second});
  }
  return out;
}

/// Scores every (record, model, target) combination. Combinations that cannot
/// be scored are listed in `skipped`; it is an error only if nothing scores.
inline ConsistencyReport aggregate_report(std::span<const EvaluationRecord> records, const EmbeddingLookup& lookup,
                                          const ReportOptions& opt = {}) {
  if (records.empty()) throw InputError("aggregate_report: no records");
  if (opt.metrics.empty()) throw InputError("aggregate_report: no metrics requested");

  std::vector<std::string> labels = opt.models;
  if (labels.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) {
      for (const auto& rs : r.responses) seen.insert(rs.label());
    }
    labels.assign(seen.begin(), seen.end());
  }
  if (labels.empty()) throw InputError("aggregate_report: records contain no responses");

  struct Partial {
    std::vector<ReportRow> rows;
    std::vector<SkipRow> skipped;
  };
  std::vector<Partial> parts(records.size());
  parallel_for(records.size(), opt.threads, [&](std::size_t k) {
    const auto& rec = records[k];
    auto& part = parts[k];
    for (const auto& label : labels) {
      for (Target t : opt.targets) {
        const ResponseSet* rs = rec.find(label);
        if (!rs) {
          part.skipped.push_back({rec.question_id, label, std::string(to_string(t)), "no responses from this model"});
          continue;
        }
        if (t == Target::kRots && rs->rots.empty()) {
          part.skipped.push_back({rec.question_id, label, "rots", "no rots generated"});
          continue;
        }
        try {
          for (const auto& [m, s] : evaluate_question(rec, label, t, opt.metrics, lookup)) {
            part.rows.push_back({label, t, m, rec.question_id, s});
          }
        } catch (const InputError& e) {
          part.skipped.push_back({rec.question_id, label, std::string(to_string(t)), e.what()});
        }
      }
    }
  });

  ConsistencyReport report;
  for (auto& p : parts) {
    std::move(p.rows.begin(), p.rows.end(), std::back_inserter(report.rows));
    std::move(p.skipped.begin(), p.skipped.end(), std::back_inserter(report.skipped));
  }
  if (report.rows.empty()) throw InputError("aggregate_report: every question was skipped");

  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.question_id, a.model, a.target, a.metric) < std::tie(b.question_id, b.model, b.target, b.metric);
  });
  std::stable_sort(report.skipped.begin(), report.skipped.end(), [](const SkipRow& a, const SkipRow& b) {
    return std::tie(a.question_id, a.model, a.target) < std::tie(b.question_id, b.model, b.target);
  });
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

// ---------------------------------------------------------------------------
// Agreement statistics

/// Binary entropy (nats) of the Y proportion. NA labels must be removed first.
inline double annotation_entropy(std::span<const Label> labels) {
  if (labels.empty()) throw InputError("annotation_entropy: no labels");
  std::size_t yes = 0;
  for (Label l : labels) {
    if (l == Label::kNotApplicable) throw InputError("annotation_entropy: NA labels must be excluded");
    if (l == Label::kYes) ++yes;
  }
  const double p = static_cast<double>(yes) / static_cast<double>(labels.size());
  double h = 0.0;
  for (double q : {p, 1.0 - p}) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

/// Nominal Krippendorff's alpha over annotation units (one unit per record).
/// NA is treated as missing; units with fewer than two labels are ignored.
inline double krippendorff_alpha(std::span<const AnnotationRecord> annotations) {
  // Coincidence matrix over the two categories, Y = 0 and N = 1.
  double o[2][2] = {{0, 0}, {0, 0}};
  for (const auto& a : annotations) {
    std::vector<int> values;
    for (Label l : a.labels) {
      if (l != Label::kNotApplicable) values.push_back(l == Label::kYes ? 0 : 1);
    }
    const std::size_t m = values.size();
    if (m < 2) continue;
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t v = 0; v < m; ++v) {
        if (u != v) o[values[u]][values[v]] += 1.0 / static_cast<double>(m - 1);
      }
    }
  }
  const double n_c[2] = {o[0][0] + o[0][1], o[1][0] + o[1][1]};
  const double n = n_c[0] + n_c[1];
  if (n < 2.0) throw UndefinedStatistic("krippendorff_alpha: no pairable values");

  const double observed = (o[0][1] + o[1][0]) / n;
  const double expected = 2.0 * n_c[0] * n_c[1] / (n * (n - 1.0));
  if (observed == 0.0) return 1.0;
  if (expected == 0.0) throw UndefinedStatistic("krippendorff_alpha: zero expected disagreement");
  return 1.0 - observed / expected;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: length mismatch");
  if (x.size() < 2) throw InputError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedStatistic("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Average ranks (1-based), ties share their mean rank.
inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Correlation with human judgements

enum class HumanAggregation { kEntropy, kMean };

inline std::string_view to_string(HumanAggregation a) { return a == HumanAggregation::kEntropy ? "entropy" : "mean"; }

inline HumanAggregation parse_aggregation(std::string_view s) {
  if (s == "entropy") return HumanAggregation::kEntropy;
  if (s == "mean") return HumanAggregation::kMean;
  throw InputError("unknown human aggregation '" + std::string(s) + "'");
}

/// Per-question human consistency, higher = more consistent. All Y/N labels
/// of a question are pooled; entropy aggregation reports ln 2 - H, mean
/// aggregation the proportion of Y. Questions without Y/N labels are absent.
inline std::map<std::string, double> human_series(std::span<const AnnotationRecord> annotations,
                                                  HumanAggregation aggregation) {
  std::map<std::string, std::vector<Label>> pooled;
  for (const auto& a : annotations) {
    auto& v = pooled[a.question_id];
    for (Label l : a.labels) {
      if (l != Label::kNotApplicable) v.push_back(l);
    }
  }
  std::map<std::string, double> out;
  for (const auto& [qid, labels] : pooled) {
    if (labels.empty()) continue;
    if (aggregation == HumanAggregation::kEntropy) {
      out[qid] = std::numbers::ln2 - annotation_entropy(labels);
    } else {
      const auto yes = std::count(labels.begin(), labels.end(), Label::kYes);
      out[qid] = static_cast<double>(yes) / static_cast<double>(labels.size());
    }
  }
  return out;
}

struct CorrelationResult {
  std::string model;
  Metric metric = Metric::kSage;
  Target target = Target::kAnswers;
  HumanAggregation aggregation = HumanAggregation::kEntropy;
  double pearson_r = 0.0;
  std::size_t n = 0;
};

struct CorrelationReport {
  std::vector<CorrelationResult> results;
  std::vector<std::string> skipped;  // "<model>/<target>/<metric>: reason"
};

/// Pearson r between every (model, target, metric) score series and the
/// human series over the question ids both share.
inline CorrelationReport correlate_with_humans(std::span<const ReportRow> rows,
                                               std::span<const AnnotationRecord> annotations,
                                               HumanAggregation aggregation) {
  const auto human = human_series(annotations, aggregation);
  std::map<std::tuple<std::string, int, int>, std::map<std::string, double>> series;
  for (const auto& r : rows) {
    series[{r.model, static_cast<int>(r.target), static_cast<int>(r.metric)}][r.question_id] = r.score;
  }

  CorrelationReport out;
  bool any_overlap = false;
  for (const auto& [key, scores] : series) {
    std::vector<double> x, y;
    for (const auto& [qid, s] : scores) {
      if (auto it = human.find(qid); it != human.end()) {
        x.push_back(s);
        y.push_back(it->second);
      }
    }
    const auto& [model, target, metric] = key;
    const std::string name =
        model + "/" + std::string(to_string(static_cast<Target>(target))) + "/" +
        std::string(to_string(static_cast<Metric>(metric)));
    if (x.empty()) {
      out.skipped.push_back(name + ": no overlapping question ids");
      continue;
    }
    any_overlap = true;
    try {
      out.results.push_back({model, static_cast<Metric>(metric), static_cast<Target>(target), aggregation,
                             pearson(x, y), x.size()});
    } catch (const std::exception& e) {
      out.skipped.push_back(name + ": " + e.what());
    }
  }
  if (!any_overlap) throw InputError("correlate_with_humans: no question ids shared by scores and annotations");
  if (out.results.empty()) throw UndefinedStatistic("correlate_with_humans: every series is constant or too short");
  return out;
}

// ---------------------------------------------------------------------------
// Temperature sweep

enum class SweepMode { kSameQuestion, kParaphrase };

inline std::string_view to_string(SweepMode m) { return m == SweepMode::kSameQuestion ? "same-question" : "paraphrase"; }

inline SweepMode parse_sweep_mode(std::string_view s) {
  if (s == "same-question") return SweepMode::kSameQuestion;
  if (s == "paraphrase") return SweepMode::kParaphrase;
  throw InputError("unknown sweep mode '" + std::string(s) + "'");
}

inline const std::vector<double>& default_temperature_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.5, 0.7, 0.9, 1.0, 1.5};
  return grid;
}

struct SweepRow {
  double temperature = 0.0;
  Metric metric = Metric::kSage;
  double mean = 0.0;
  std::size_t count = 0;
};

struct SweepResult {
  SweepMode mode = SweepMode::kSameQuestion;
  std::string model;
  std::vector<double> temperatures;
  std::vector<SweepRow> rows;  // ordered by (temperature, metric)
  std::vector<SkipRow> skipped;

  /// Per-temperature means of one metric, in grid order.
  [[nodiscard]] std::vector<double> curve(Metric m) const {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.metric == m) out.push_back(r.mean);
    }
    return out;
  }
};

struct SweepOptions {
  std::size_t draws = 5;
  int max_tokens = 256;
  std::vector<Metric> metrics{Metric::kRougeL, Metric::kSage};
  ParaphraseSettings paraphrase;  // paraphrase mode only
  std::size_t threads = 1;
};

/// Regenerates answers at every temperature of the grid and scores them.
/// Same-question mode draws `draws` samples of the original question;
/// paraphrase mode answers the first `draws` retained paraphrases once.
inline SweepResult temperature_sweep(std::span<const QuestionRecord> questions, std::span<const double> temps,
                                     SweepMode mode, const std::string& model_id, Gateway& gateway,
                                     const SweepOptions& opt = {}) {
  if (temps.empty()) throw InputError("temperature_sweep: empty temperature grid");
  for (std::size_t i = 0; i < temps.size(); ++i) {
    if (!(temps[i] >= 0.0)) throw InputError("temperature_sweep: temperatures must be >= 0");
    if (i > 0 && !(temps[i] > temps[i - 1])) throw InputError("temperature_sweep: grid must be strictly increasing");
  }
  if (questions.empty()) throw InputError("temperature_sweep: no questions");
  if (opt.draws < 2) throw InputError("temperature_sweep: need at least 2 draws");
  if (opt.metrics.empty()) throw InputError("temperature_sweep: no metrics requested");

  // scores[q][t] -> per-metric score, absent when the question was skipped.
  std::vector<std::vector<MetricScores>> scores(questions.size());
  std::vector<std::optional<SkipRow>> skipped(questions.size());

  parallel_for(questions.size(), opt.threads, [&](std::size_t qi) {
    const auto& q = questions[qi];
    std::vector<std::string> prompts;
    if (mode == SweepMode::kSameQuestion) {
      prompts.assign(opt.draws, q.question);
    } else {
      const auto group = build_paraphrase_group(gateway, q, opt.paraphrase);
      for (const auto& p : group.kept()) {
        if (prompts.size() < opt.draws) prompts.push_back(p.text);
      }
      if (prompts.size() < 2) {
        skipped[qi] = SkipRow{q.id, model_id, "answers", "fewer than 2 paraphrases survived filtering"};
        return;
      }
    }
    for (double t : temps) {
      std::vector<std::string> answers;
      for (std::size_t s = 0; s < prompts.size(); ++s) {
        GenerationConfig cfg{model_id, t, opt.max_tokens,
                             static_cast<std::uint32_t>(mode == SweepMode::kSameQuestion ? s : 0)};
        answers.push_back(gateway.generate_answer(prompts[s], cfg));
      }
      std::vector<EmbeddingVector> emb;
      if (needs_embeddings(opt.metrics)) emb = gateway.embed(answers);
      scores[qi].push_back(score_texts(answers, opt.metrics, emb));
    }
  });

  SweepResult out;
  out.mode = mode;
  out.model = model_id;
  out.temperatures.assign(temps.begin(), temps.end());
  for (auto& s : skipped) {
    if (s) out.skipped.push_back(std::move(*s));
  }
  for (std::size_t ti = 0; ti < temps.size(); ++ti) {
    for (std::size_t mi = 0; mi < opt.metrics.size(); ++mi) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& per_question : scores) {
        if (per_question.empty()) continue;
        sum += per_question[ti][mi].second;
        ++n;
      }
      if (n == 0) throw InputError("temperature_sweep: every question was skipped");
      out.rows.push_back({temps[ti], opt.metrics[mi], sum / static_cast<double>(n), n});
    }
  }
  return out;
}

}  // namespace sage
