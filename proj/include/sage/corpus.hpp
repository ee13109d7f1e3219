// SPDX-License-Identifier: Apache-2.0
#pragma once

// Record types and their line-delimited JSON persistence.
//
// Every file written here starts with a header line
//   {"schema": "<name>", "version": 1}
// followed by one JSON object per line. Writes go to a temporary sibling and
// are renamed into place. Question, RoT and annotation files are usually
// produced by hand, so their header line is optional on load.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/error.hpp"
#include "sage/text.hpp"

namespace sage {

namespace schema {
inline constexpr int kVersion = 1;
inline constexpr std::string_view kQuestions = "sage.questions";
inline constexpr std::string_view kParaphrases = "sage.paraphrases";
inline constexpr std::string_view kRecords = "sage.records";
inline constexpr std::string_view kAnnotations = "sage.annotations";
inline constexpr std::string_view kRots = "sage.rots";
inline constexpr std::string_view kEmbeddings = "sage.embeddings";
}  // namespace schema

struct QuestionRecord {
  std::string id;
  std::string question;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

struct Paraphrase {
  std::string text;
  double quality = 0.0;

  friend bool operator==(const Paraphrase&, const Paraphrase&) = default;
};

enum class ResponseVariant { kPlain, kRotConditioned };

inline std::string_view to_string(ResponseVariant v) {
  return v == ResponseVariant::kPlain ? "plain" : "rot-conditioned";
}

inline ResponseVariant parse_variant(std::string_view s) {
  if (s == "plain") return ResponseVariant::kPlain;
  if (s == "rot-conditioned") return ResponseVariant::kRotConditioned;
  throw SchemaError("unknown response variant '" + std::string(s) + "'");
}

struct GenerationSummary {
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 0;

  friend bool operator==(const GenerationSummary&, const GenerationSummary&) = default;
};

/// One model's answers (and optionally RoTs) over a record's paraphrases.
/// Entry i of every non-empty sequence belongs to paraphrase i.
struct ResponseSet {
  std::string model_id;
  ResponseVariant variant = ResponseVariant::kPlain;
  std::uint32_t sample_index = 0;
  GenerationSummary generation;
  std::vector<std::string> answers;
  std::vector<std::string> rots;
  /// RoTs the answers were conditioned on (rot-conditioned variant only).
  std::vector<std::string> given_rots;

  /// Name used in reports: the model id, suffixed for rot-conditioned sets.
  [[nodiscard]] std::string label() const {
    return variant == ResponseVariant::kPlain ? model_id : model_id + "+rot";
  }

  friend bool operator==(const ResponseSet&, const ResponseSet&) = default;
};

struct EvaluationRecord {
  std::string question_id;
  std::string source;
  std::vector<Paraphrase> paraphrases;
  std::vector<ResponseSet> responses;

  [[nodiscard]] std::vector<std::string> paraphrase_texts() const {
    std::vector<std::string> out;
    out.reserve(paraphrases.size());
    for (const auto& p : paraphrases) out.push_back(p.text);
    return out;
  }

  [[nodiscard]] const ResponseSet* find(std::string_view label) const {
    for (const auto& r : responses) {
      if (r.label() == label) return &r;
    }
    return nullptr;
  }

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

enum class Label { kYes, kNo, kNotApplicable };

inline Label parse_label(std::string_view s) {
  if (s == "Y") return Label::kYes;
  if (s == "N") return Label::kNo;
  if (s == "NA") return Label::kNotApplicable;
  throw SchemaError("unknown annotation label '" + std::string(s) + "' (expected Y, N or NA)");
}

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::kYes: return "Y";
    case Label::kNo: return "N";
    case Label::kNotApplicable: return "NA";
  }
  return "?";
}

/// Three raters' judgement of whether answers i and j follow the same rule.
struct AnnotationRecord {
  std::string question_id;
  std::size_t i = 0;
  std::size_t j = 1;
  std::array<Label, 3> labels{Label::kNotApplicable, Label::kNotApplicable, Label::kNotApplicable};

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Output group of the paraphrase stage: every scored candidate, and whether
/// the question kept fewer than two paraphrases.
struct ParaphraseGroup {
  std::string question_id;
  std::string source;
  std::vector<ParaphraseCandidate> candidates;
  std::vector<bool> retained;
  bool flagged = false;

  [[nodiscard]] std::vector<Paraphrase> kept() const {
    std::vector<Paraphrase> out;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (retained[k]) out.push_back({candidates[k].text, candidates[k].quality});
    }
    return out;
  }
};

/// A fixed rule of thumb per question (e.g. a human-written one).
struct RotRecord {
  std::string question_id;
  std::string rot;
};

// ---------------------------------------------------------------------------
// Validation

/// Lists every violated invariant; empty means valid.
inline std::vector<std::string> validate_record(const EvaluationRecord& r) {
  std::vector<std::string> v;
  const std::size_t n = r.paraphrases.size();
  if (r.question_id.empty()) v.emplace_back("question_id is empty");
  if (n < 2) v.push_back("needs at least 2 paraphrases, has " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (tokenize(r.paraphrases[i].text).empty()) v.push_back("paraphrase " + std::to_string(i) + " is empty");
    const double q = r.paraphrases[i].quality;
    if (!(q >= 0.0 && q <= 1.0)) v.push_back("paraphrase " + std::to_string(i) + " quality outside [0, 1]");
  }

  std::set<std::pair<std::string, std::uint32_t>> seen;
  for (const auto& rs : r.responses) {
    const std::string who = "responses of '" + rs.label() + "'";
    if (rs.model_id.empty()) v.push_back(who + ": model_id is empty");
    if (!seen.emplace(rs.label(), rs.sample_index).second) {
      v.push_back(who + ": duplicate response set for sample " + std::to_string(rs.sample_index));
    }
    auto check_aligned = [&](const std::vector<std::string>& texts, std::string_view what) {
      if (texts.empty()) return;
      if (texts.size() != n) {
        v.push_back(who + ": " + std::to_string(texts.size()) + " " + std::string(what) + " for " +
                    std::to_string(n) + " paraphrases");
        return;
      }
      for (std::size_t i = 0; i < texts.size(); ++i) {
        if (tokenize(texts[i]).empty()) v.push_back(who + ": " + std::string(what) + " " + std::to_string(i) + " is empty");
      }
    };
    check_aligned(rs.answers, "answers");
    check_aligned(rs.rots, "rots");
    check_aligned(rs.given_rots, "given_rots");
    if (!rs.rots.empty() && rs.answers.empty()) v.push_back(who + ": rots present without answers");
    if (rs.variant == ResponseVariant::kRotConditioned && rs.given_rots.empty()) {
      v.push_back(who + ": rot-conditioned answers without given_rots");
    }
    if (rs.variant == ResponseVariant::kPlain && !rs.given_rots.empty()) {
      v.push_back(who + ": given_rots on a plain response set");
    }
  }
  return v;
}

inline std::vector<std::string> validate_annotation(const AnnotationRecord& a) {
  std::vector<std::string> v;
  if (a.question_id.empty()) v.emplace_back("question_id is empty");
  if (a.i == a.j) v.emplace_back("pair indices must differ");
  if (a.i > a.j) v.emplace_back("pair indices must be ordered (i < j)");
  return v;
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline nlohmann::json to_json(const ResponseSet& rs) {
  nlohmann::json j{{"model", rs.model_id},
                   {"variant", to_string(rs.variant)},
                   {"sample_index", rs.sample_index},
                   {"generation",
                    {{"model", rs.generation.model_id},
                     {"temperature", rs.generation.temperature},
                     {"max_tokens", rs.generation.max_tokens}}},
                   {"answers", rs.answers}};
  if (!rs.rots.empty()) j["rots"] = rs.rots;
  if (!rs.given_rots.empty()) j["given_rots"] = rs.given_rots;
  return j;
}

inline ResponseSet response_from_json(const nlohmann::json& j) {
  ResponseSet rs;
  rs.model_id = j.at("model").get<std::string>();
  rs.variant = parse_variant(j.value("variant", std::string("plain")));
  rs.sample_index = j.value("sample_index", 0u);
  if (j.contains("generation")) {
    const auto& g = j.at("generation");
    rs.generation.model_id = g.value("model", std::string());
    rs.generation.temperature = g.value("temperature", 0.0);
    rs.generation.max_tokens = g.value("max_tokens", 0);
  }
  rs.answers = j.value("answers", std::vector<std::string>{});
  rs.rots = j.value("rots", std::vector<std::string>{});
  rs.given_rots = j.value("given_rots", std::vector<std::string>{});
  return rs;
}

}  // namespace detail

inline nlohmann::json to_json(const EvaluationRecord& r) {
  nlohmann::json paras = nlohmann::json::array();
  for (const auto& p : r.paraphrases) paras.push_back({{"text", p.text}, {"quality", p.quality}});
  nlohmann::json responses = nlohmann::json::array();
  for (const auto& rs : r.responses) responses.push_back(detail::to_json(rs));
  return {{"question_id", r.question_id}, {"source", r.source}, {"paraphrases", paras}, {"responses", responses}};
}

inline EvaluationRecord record_from_json(const nlohmann::json& j) {
  EvaluationRecord r;
  r.question_id = j.at("question_id").get<std::string>();
  r.source = j.value("source", std::string());
  for (const auto& p : j.at("paraphrases")) {
    r.paraphrases.push_back({p.at("text").get<std::string>(), p.at("quality").get<double>()});
  }
  if (j.contains("responses")) {
    for (const auto& rs : j.at("responses")) r.responses.push_back(detail::response_from_json(rs));
  }
  return r;
}

inline nlohmann::json to_json(const ParaphraseGroup& g) {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t k = 0; k < g.candidates.size(); ++k) {
    const auto& c = g.candidates[k];
    cands.push_back({{"text", c.text},
                     {"semantic_sim", c.semantic_sim},
                     {"lexical_div", c.lexical_div},
                     {"quality", c.quality},
                     {"retained", static_cast<bool>(g.retained[k])}});
  }
  return {{"question_id", g.question_id}, {"source", g.source}, {"candidates", cands}, {"flagged", g.flagged}};
}

inline ParaphraseGroup group_from_json(const nlohmann::json& j) {
  ParaphraseGroup g;
  g.question_id = j.at("question_id").get<std::string>();
  g.source = j.at("source").get<std::string>();
  for (const auto& c : j.at("candidates")) {
    g.candidates.push_back({c.at("text").get<std::string>(), c.at("semantic_sim").get<double>(),
                            c.at("lexical_div").get<double>(), c.at("quality").get<double>()});
    g.retained.push_back(c.at("retained").get<bool>());
  }
  g.flagged = j.at("flagged").get<bool>();
  return g;
}

inline nlohmann::json to_json(const AnnotationRecord& a) {
  return {{"question_id", a.question_id},
          {"pair", {a.i, a.j}},
          {"labels", {to_string(a.labels[0]), to_string(a.labels[1]), to_string(a.labels[2])}}};
}

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  AnnotationRecord a;
  a.question_id = j.at("question_id").get<std::string>();
  const auto& pair = j.at("pair");
  if (!pair.is_array() || pair.size() != 2) throw SchemaError("pair must hold exactly two indices");
  a.i = pair[0].get<std::size_t>();
  a.j = pair[1].get<std::size_t>();
  const auto& labels = j.at("labels");
  if (!labels.is_array() || labels.size() != 3) throw SchemaError("labels must hold exactly three values");
  for (std::size_t k = 0; k < 3; ++k) a.labels[k] = parse_label(labels[k].get<std::string>());
  return a;
}

// ---------------------------------------------------------------------------
// Line-delimited files

struct JsonLine {
  std::size_t lineno;
  nlohmann::json value;
};

/// Reads a JSONL file. The header line, when present, must name `expected`.
inline std::vector<JsonLine> read_jsonl(const std::filesystem::path& path, std::string_view expected,
                                        bool header_required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<JsonLine> out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    }
    if (!j.is_object()) throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected a JSON object");
    if (first) {
      first = false;
      if (j.contains("schema")) {
        if (j["schema"] != expected) {
          throw SchemaError(path.string() + ": schema is '" + j["schema"].dump() + "', expected '" +
                            std::string(expected) + "'");
        }
        if (j.value("version", 0) != schema::kVersion) {
          throw SchemaError(path.string() + ": unsupported schema version " + j.value("version", nlohmann::json()).dump());
        }
        continue;
      }
      if (header_required) throw SchemaError(path.string() + ": missing header line for " + std::string(expected));
    }
    out.push_back({lineno, std::move(j)});
  }
  if (first && header_required && lineno > 0) {
    throw SchemaError(path.string() + ": missing header line for " + std::string(expected));
  }
  return out;
}

/// Writes header + lines to a temporary sibling, then renames it over `path`.
inline void write_jsonl_atomic(const std::filesystem::path& path, std::string_view schema_name,
                               const std::vector<nlohmann::json>& lines,
                               const nlohmann::json& extra_header = nlohmann::json::object()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    nlohmann::json header{{"schema", schema_name}, {"version", schema::kVersion}};
    header.update(extra_header);
    out << header.dump() << '\n';
    for (const auto& j : lines) out << j.dump() << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class T, class Parse>
std::vector<T> parse_lines(const std::filesystem::path& path, const std::vector<JsonLine>& lines, Parse parse) {
  std::vector<T> out;
  out.reserve(lines.size());
  for (const auto& l : lines) {
    try {
      out.push_back(parse(l.value));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, schema::kQuestions, false);
  std::set<std::string> ids;
  std::vector<QuestionRecord> out;
  for (const auto& l : lines) {
    QuestionRecord q;
    try {
      q.id = l.value.at("id").is_string() ? l.value.at("id").get<std::string>() : l.value.at("id").dump();
      q.question = l.value.at("question").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": " + e.what());
    }
    if (q.id.empty()) throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": empty id");
    if (tokenize(q.question).empty()) {
      throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": empty question for id '" + q.id + "'");
    }
    if (!ids.insert(q.id).second) {
      throw SchemaError(path.string() + ":" + std::to_string(l.lineno) + ": duplicate question id '" + q.id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

inline void save_questions(const std::vector<QuestionRecord>& qs, const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  for (const auto& q : qs) lines.push_back({{"id", q.id}, {"question", q.question}});
  write_jsonl_atomic(path, schema::kQuestions, lines);
}

inline void save_records(const std::vector<EvaluationRecord>& records, const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r));
  write_jsonl_atomic(path, schema::kRecords, lines);
}

/// Loads and validates evaluation records; any invariant violation is an error.
inline std::vector<EvaluationRecord> load_records(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, schema::kRecords, true);
  auto records = parse_lines<EvaluationRecord>(path, lines, record_from_json);
  std::set<std::string> ids;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto where = path.string() + ":" + std::to_string(lines[k].lineno);
    if (auto v = validate_record(records[k]); !v.empty()) {
      std::string msg = where + ": invalid record '" + records[k].question_id + "':";
      for (const auto& s : v) msg += "\n  - " + s;
      throw SchemaError(msg);
    }
    if (!ids.insert(records[k].question_id).second) {
      throw SchemaError(where + ": duplicate question id '" + records[k].question_id + "'");
    }
  }
  return records;
}

inline void save_paraphrase_groups(const std::vector<ParaphraseGroup>& groups, const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  for (const auto& g : groups) lines.push_back(to_json(g));
  write_jsonl_atomic(path, schema::kParaphrases, lines);
}

inline std::vector<ParaphraseGroup> load_paraphrase_groups(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, schema::kParaphrases, true);
  return parse_lines<ParaphraseGroup>(path, lines, group_from_json);
}

inline std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, schema::kAnnotations, false);
  auto out = parse_lines<AnnotationRecord>(path, lines, annotation_from_json);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (auto v = validate_annotation(out[k]); !v.empty()) {
      throw SchemaError(path.string() + ":" + std::to_string(lines[k].lineno) + ": " + v.front());
    }
  }
  return out;
}

inline void save_annotations(const std::vector<AnnotationRecord>& anns, const std::filesystem::path& path) {
  std::vector<nlohmann::json> lines;
  for (const auto& a : anns) lines.push_back(to_json(a));
  write_jsonl_atomic(path, schema::kAnnotations, lines);
}

inline std::vector<RotRecord> load_rots(const std::filesystem::path& path) {
  const auto lines = read_jsonl(path, schema::kRots, false);
  auto out = parse_lines<RotRecord>(path, lines, [](const nlohmann::json& j) {
    RotRecord r{j.at("question_id").get<std::string>(), j.at("rot").get<std::string>()};
    if (tokenize(r.rot).empty()) throw SchemaError("empty rot for question '" + r.question_id + "'");
    return r;
  });
  std::set<std::string> ids;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!ids.insert(out[k].question_id).second) {
      throw SchemaError(path.string() + ":" + std::to_string(lines[k].lineno) + ": duplicate question id '" +
                        out[k].question_id + "'");
    }
  }
  return out;
}

}  // namespace sage
