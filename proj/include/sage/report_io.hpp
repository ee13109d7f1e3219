// SPDX-License-Identifier: Apache-2.0
#pragma once

// Table emission for reports, sweeps and correlations.
//
// Column schemas (version 1):
//   scores       model,target,metric,question_id,score
//   aggregates   model,target,metric,mean,count
//   skipped      question_id,model,target,reason
//   sweep        mode,model,temperature,metric,mean,count
//   correlations model,target,metric,aggregation,pearson_r,n
//
// Reals are printed with 4 decimals; temperatures with up to 4 significant
// decimals as given. Output is a pure function of the input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sage/analysis.hpp"
#include "sage/error.hpp"

namespace sage {

enum class ReportFormat { kCsv, kMarkdown };

inline ReportFormat parse_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "markdown" || s == "md" || s == "markdown-table") return ReportFormat::kMarkdown;
  throw InputError("unknown report format '" + std::string(s) + "'");
}

inline std::string_view extension(ReportFormat f) { return f == ReportFormat::kCsv ? ".csv" : ".md"; }

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

inline std::string format_temperature(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", t);
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out.push_back(' ');
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline std::string render(const Table& t, ReportFormat format) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    if (format == ReportFormat::kCsv) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        out += detail::csv_field(cells[i]);
      }
    } else {
      out += "|";
      for (const auto& c : cells) out += " " + detail::md_cell(c) + " |";
    }
    out.push_back('\n');
  };
  line(t.columns);
  if (format == ReportFormat::kMarkdown) {
    out += "|";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += " --- |";
    out.push_back('\n');
  }
  for (const auto& r : t.rows) line(r);
  return out;
}

/// Writes a table; an empty table is an error and creates no file.
inline void emit(const Table& t, const std::filesystem::path& path, ReportFormat format) {
  if (t.rows.empty()) throw InputError("refusing to emit an empty report to " + path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << render(t, format);
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Table scores_table(const ConsistencyReport& r) {
  Table t{{"model", "target", "metric", "question_id", "score"}, {}};
  for (const auto& row : r.rows) {
    t.rows.push_back({row.model, std::string(to_string(row.target)), std::string(to_string(row.metric)),
                      row.question_id, fixed4(row.score)});
  }
  return t;
}

inline Table aggregates_table(const ConsistencyReport& r) {
  Table t{{"model", "target", "metric", "mean", "count"}, {}};
  for (const auto& a : r.aggregates) {
    t.rows.push_back({a.model, std::string(to_string(a.target)), std::string(to_string(a.metric)), fixed4(a.mean),
                      std::to_string(a.count)});
  }
  return t;
}

inline Table skipped_table(std::span<const SkipRow> skipped) {
  Table t{{"question_id", "model", "target", "reason"}, {}};
  for (const auto& s : skipped) t.rows.push_back({s.question_id, s.model, s.target, s.reason});
  return t;
}

inline Table sweep_table(const SweepResult& s) {
  Table t{{"mode", "model", "temperature", "metric", "mean", "count"}, {}};
  for (const auto& r : s.rows) {
    t.rows.push_back({std::string(to_string(s.mode)), s.model, format_temperature(r.temperature),
                      std::string(to_string(r.metric)), fixed4(r.mean), std::to_string(r.count)});
  }
  return t;
}

inline Table correlations_table(const CorrelationReport& c) {
  Table t{{"model", "target", "metric", "aggregation", "pearson_r", "n"}, {}};
  for (const auto& r : c.results) {
    t.rows.push_back({r.model, std::string(to_string(r.target)), std::string(to_string(r.metric)),
                      std::string(to_string(r.aggregation)), fixed4(r.pearson_r), std::to_string(r.n)});
  }
  return t;
}

/// Splits CSV text into rows of fields (RFC 4180 quoting).
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw SchemaError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Reads a scores table written by `emit(scores_table(...), ..., kCsv)`.
inline std::vector<ReportRow> load_score_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto rows = parse_csv(text);
  const std::vector<std::string> expected{"model", "target", "metric", "question_id", "score"};
  if (rows.empty() || rows[0] != expected) throw SchemaError(path.string() + ": not a scores table");
  std::vector<ReportRow> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.size() != expected.size()) {
      throw SchemaError(path.string() + ":" + std::to_string(k + 1) + ": expected 5 columns");
    }
    try {
      out.push_back({r[0], parse_target(r[1]), parse_metric(r[2]), r[3], std::stod(r[4])});
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(k + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sage
