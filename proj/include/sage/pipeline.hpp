// SPDX-License-Identifier: Apache-2.0
#pragma once

// Pipeline stages as library calls. The CLI is a thin shell over these.
//
//   paraphrase   questions.jsonl    -> paraphrases.jsonl
//   generate     paraphrases.jsonl  -> records.jsonl
//   rot          records.jsonl      -> records.jsonl (rots filled in)
//   rot-answer   records + rots     -> records.jsonl (rot-conditioned sets added)
//   score        records.jsonl      -> scores / aggregates / skipped tables
//   sweep        questions.jsonl    -> sweep table
//   correlate    scores + annotations -> correlations table

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "sage/analysis.hpp"
#include "sage/config.hpp"
#include "sage/corpus.hpp"
#include "sage/embedding_store.hpp"
#include "sage/gateway.hpp"
#include "sage/parallel.hpp"
#include "sage/paraphrase_stage.hpp"
#include "sage/report_io.hpp"

namespace sage {

namespace fs = std::filesystem;

struct StageSummary {
  std::size_t processed = 0;
  std::vector<SkipRow> skipped;
};

namespace detail {

inline fs::path sibling(const fs::path& p, std::string_view suffix) {
  auto out = p;
  out += suffix;
  return out;
}

inline void write_skips(const std::vector<SkipRow>& skipped, const fs::path& path) {
  if (skipped.empty()) {
    std::error_code ec;
    fs::remove(path, ec);
    return;
  }
  emit(skipped_table(skipped), path, ReportFormat::kCsv);
}

inline std::vector<std::string> models_or_default(const RunConfig& cfg) {
  if (cfg.target_models.empty()) throw InputError("no target models configured (models.targets)");
  return cfg.target_models;
}

}  // namespace detail

/// Builds one paraphrase group per question. Flagged groups are kept in the
/// output (with `flagged` set) and listed in the summary.
inline StageSummary cmd_paraphrase(const RunConfig& cfg, Gateway& gw, const fs::path& questions_path,
                                   const fs::path& out_path) {
  const auto questions = load_questions(questions_path);
  if (questions.empty()) throw InputError(questions_path.string() + ": no questions");
  const auto settings = cfg.paraphrase_settings();
  std::vector<ParaphraseGroup> groups(questions.size());
  parallel_for(questions.size(), cfg.concurrency,
               [&](std::size_t k) { groups[k] = build_paraphrase_group(gw, questions[k], settings); });
  save_paraphrase_groups(groups, out_path);

  StageSummary s;
  s.processed = groups.size();
  for (const auto& g : groups) {
    if (g.flagged) s.skipped.push_back({g.question_id, "", "", "fewer than 2 paraphrases passed the quality filter"});
  }
  return s;
}

/// Answers every retained paraphrase with every target model.
inline StageSummary cmd_generate(const RunConfig& cfg, Gateway& gw, const fs::path& groups_path,
                                 const fs::path& out_path) {
  const auto groups = load_paraphrase_groups(groups_path);
  const auto models = detail::models_or_default(cfg);
  StageSummary s;
  std::vector<const ParaphraseGroup*> usable;
  for (const auto& g : groups) {
    if (g.flagged) {
      s.skipped.push_back({g.question_id, "", "", "flagged by the paraphrase stage"});
    } else {
      usable.push_back(&g);
    }
  }
  if (usable.empty()) throw InputError(groups_path.string() + ": every question is flagged");

  std::vector<EvaluationRecord> records(usable.size());
  parallel_for(usable.size(), cfg.concurrency, [&](std::size_t k) {
    const auto& g = *usable[k];
    auto& rec = records[k];
    rec.question_id = g.question_id;
    rec.source = g.source;
    rec.paraphrases = g.kept();
    for (const auto& model : models) {
      ResponseSet rs;
      rs.model_id = model;
      rs.generation = {model, cfg.answer_temperature, cfg.max_tokens};
      const GenerationConfig gc{model, cfg.answer_temperature, cfg.max_tokens, 0};
      for (const auto& p : rec.paraphrases) rs.answers.push_back(gw.generate_answer(p.text, gc));
      rec.responses.push_back(std::move(rs));
    }
  });
  save_records(records, out_path);
  s.processed = records.size();
  return s;
}

/// Fills in one RoT per answer for every plain response set. The RoT model
/// defaults to the model that wrote the answers.
inline StageSummary cmd_rot(const RunConfig& cfg, Gateway& gw, const fs::path& records_path,
                            const fs::path& out_path) {
  auto records = load_records(records_path);
  parallel_for(records.size(), cfg.concurrency, [&](std::size_t k) {
    auto& rec = records[k];
    for (auto& rs : rec.responses) {
      if (rs.variant != ResponseVariant::kPlain || rs.answers.empty()) continue;
      const std::string model = cfg.rot_model.empty() ? rs.model_id : cfg.rot_model;
      const GenerationConfig gc{model, cfg.rot_temperature, cfg.max_tokens, 0};
      rs.rots.clear();
      for (std::size_t i = 0; i < rs.answers.size(); ++i) {
        rs.rots.push_back(gw.generate_rot(rec.paraphrases[i].text, rs.answers[i], gc));
      }
    }
  });
  save_records(records, out_path);
  return {records.size(), {}};
}

/// Adds a rot-conditioned response set per plain set, answering each
/// paraphrase with the question's fixed RoT in the prompt.
inline StageSummary cmd_rot_answer(const RunConfig& cfg, Gateway& gw, const fs::path& records_path,
                                   const fs::path& rots_path, const fs::path& out_path) {
  auto records = load_records(records_path);
  std::map<std::string, std::string> rot_of;
  for (auto& r : load_rots(rots_path)) rot_of.emplace(std::move(r.question_id), std::move(r.rot));

  StageSummary s;
  std::vector<std::optional<SkipRow>> missing(records.size());
  parallel_for(records.size(), cfg.concurrency, [&](std::size_t k) {
    auto& rec = records[k];
    auto it = rot_of.find(rec.question_id);
    if (it == rot_of.end()) {
      missing[k] = SkipRow{rec.question_id, "", "answers", "no rule of thumb for this question"};
      return;
    }
    std::vector<std::string> models;
    for (const auto& rs : rec.responses) {
      if (rs.variant == ResponseVariant::kPlain) models.push_back(rs.model_id);
    }
    if (models.empty()) models = cfg.target_models;
    std::erase_if(rec.responses, [](const ResponseSet& rs) { return rs.variant == ResponseVariant::kRotConditioned; });
    for (const auto& model : models) {
      ResponseSet rs;
      rs.model_id = model;
      rs.variant = ResponseVariant::kRotConditioned;
      rs.generation = {model, cfg.answer_temperature, cfg.max_tokens};
      const GenerationConfig gc{model, cfg.answer_temperature, cfg.max_tokens, 0};
      for (const auto& p : rec.paraphrases) {
        rs.answers.push_back(gw.generate_answer_with_rot(p.text, it->second, gc));
        rs.given_rots.push_back(it->second);
      }
      rec.responses.push_back(std::move(rs));
    }
  });
  for (auto& m : missing) {
    if (m) s.skipped.push_back(std::move(*m));
  }
  if (s.skipped.size() == records.size()) throw InputError(rots_path.string() + ": no question has a rule of thumb");
  save_records(records, out_path);
  s.processed = records.size() - s.skipped.size();
  return s;
}

struct ScoreOptions {
  fs::path out_dir = "report";
  fs::path embeddings;  // sidecar; empty = <out_dir>/embeddings.jsonl
  std::vector<std::string> models;  // response-set labels; empty = all
  std::size_t embed_batch = 64;
};

/// Texts whose embeddings a report over `records` will look up.
inline std::vector<std::string> texts_to_embed(std::span<const EvaluationRecord> records,
                                               std::span<const Target> targets) {
  std::vector<std::string> out;
  for (const auto& rec : records) {
    for (const auto& rs : rec.responses) {
      for (Target t : targets) {
        const auto& texts = target_texts(rs, t);
        out.insert(out.end(), texts.begin(), texts.end());
      }
    }
  }
  return out;
}

/// Embeds every text missing from `store`, in batches. Returns the number
/// of new vectors.
inline std::size_t fill_embeddings(EmbeddingStore& store, Gateway& gw, std::span<const std::string> texts,
                                   std::size_t batch, std::size_t threads) {
  std::vector<std::string> missing;
  std::set<std::string> queued;
  for (const auto& t : texts) {
    if (!store.find(t) && queued.insert(t).second) missing.push_back(t);
  }
  if (missing.empty()) return 0;
  batch = std::max<std::size_t>(batch, 1);
  const std::size_t nb = (missing.size() + batch - 1) / batch;
  std::vector<std::vector<EmbeddingVector>> out(nb);
  parallel_for(nb, threads, [&](std::size_t b) {
    const std::size_t lo = b * batch, hi = std::min(missing.size(), lo + batch);
    out[b] = gw.embed(std::span<const std::string>(missing).subspan(lo, hi - lo));
  });
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < out[b].size(); ++k) store.insert(missing[b * batch + k], std::move(out[b][k]));
  }
  return missing.size();
}

/// Scores records already loaded into memory against a ready sidecar.
inline ConsistencyReport score_records(std::span<const EvaluationRecord> records, const EmbeddingStore& store,
                                       const RunConfig& cfg, std::vector<std::string> models = {}) {
  ReportOptions ro;
  ro.models = std::move(models);
  ro.targets = expand(cfg.target);
  ro.metrics = cfg.metrics;
  ro.threads = std::max<std::size_t>(cfg.concurrency, std::thread::hardware_concurrency());
  return aggregate_report(records, [&](std::string_view t) { return store.find(t); }, ro);
}

/// Full scoring stage: sidecar load, embedding of anything missing, report
/// emission. Writes scores.csv, aggregates.csv, aggregates.md and, when any
/// combination was skipped, skipped.csv.
inline ConsistencyReport cmd_score(const RunConfig& cfg, Gateway& gw, const fs::path& records_path,
                                   const ScoreOptions& opt) {
  const auto records = load_records(records_path);
  if (records.empty()) throw InputError(records_path.string() + ": no records");
  const fs::path sidecar = opt.embeddings.empty() ? opt.out_dir / "embeddings.jsonl" : opt.embeddings;

  EmbeddingStore store(cfg.embedding_model);
  if (needs_embeddings(cfg.metrics)) {
    if (fs::exists(sidecar)) store = EmbeddingStore::load(sidecar, cfg.embedding_model);
    const auto targets = expand(cfg.target);
    const auto texts = texts_to_embed(records, targets);
    if (fill_embeddings(store, gw, texts, opt.embed_batch, cfg.concurrency) > 0) store.save(sidecar);
  }

  auto report = score_records(records, store, cfg, opt.models);
  emit(scores_table(report), opt.out_dir / "scores.csv", ReportFormat::kCsv);
  emit(aggregates_table(report), opt.out_dir / "aggregates.csv", ReportFormat::kCsv);
  emit(aggregates_table(report), opt.out_dir / "aggregates.md", ReportFormat::kMarkdown);
  detail::write_skips(report.skipped, opt.out_dir / "skipped.csv");
  return report;
}

inline SweepResult cmd_sweep(const RunConfig& cfg, Gateway& gw, const fs::path& questions_path, SweepMode mode,
                             std::string model, const fs::path& out_dir) {
  const auto questions = load_questions(questions_path);
  if (model.empty()) model = detail::models_or_default(cfg).front();
  SweepOptions so;
  so.draws = cfg.sweep_draws;
  so.max_tokens = cfg.max_tokens;
  so.paraphrase = cfg.paraphrase_settings();
  so.threads = cfg.concurrency;
  std::vector<Metric> metrics;
  for (Metric m : cfg.metrics) metrics.push_back(m);
  so.metrics = metrics;
  auto result = temperature_sweep(questions, cfg.sweep_temperatures, mode, model, gw, so);
  emit(sweep_table(result), out_dir / "sweep.csv", ReportFormat::kCsv);
  emit(sweep_table(result), out_dir / "sweep.md", ReportFormat::kMarkdown);
  detail::write_skips(result.skipped, out_dir / "sweep_skipped.csv");
  return result;
}

inline CorrelationReport cmd_correlate(const fs::path& scores_path, const fs::path& annotations_path,
                                       HumanAggregation aggregation, const fs::path& out_dir) {
  const auto rows = load_score_rows(scores_path);
  const auto annotations = load_annotations(annotations_path);
  auto report = correlate_with_humans(rows, annotations, aggregation);
  emit(correlations_table(report), out_dir / "correlations.csv", ReportFormat::kCsv);
  emit(correlations_table(report), out_dir / "correlations.md", ReportFormat::kMarkdown);
  return report;
}

/// Every schema violation in a records file, one message per problem.
/// A file that cannot be parsed at all yields a single message.
inline std::vector<std::string> cmd_validate(const fs::path& records_path) {
  std::vector<std::string> problems;
  std::vector<JsonLine> lines;
  try {
    lines = read_jsonl(records_path, schema::kRecords, true);
  } catch (const std::exception& e) {
    return {e.what()};
  }
  std::set<std::string> ids;
  for (const auto& l : lines) {
    const auto where = records_path.string() + ":" + std::to_string(l.lineno);
    EvaluationRecord r;
    try {
      r = record_from_json(l.value);
    } catch (const std::exception& e) {
      problems.push_back(where + ": " + e.what());
      continue;
    }
    if (!ids.insert(r.question_id).second) problems.push_back(where + ": duplicate question id '" + r.question_id + "'");
    for (const auto& v : validate_record(r)) problems.push_back(where + ": " + v);
  }
  return problems;
}

}  // namespace sage
