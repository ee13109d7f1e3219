// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sidecar embedding file, keyed by sha256 of the text:
//
//   {"schema":"sage.embeddings","version":1,"model":"<id>","dim":768}
//   {"key":"<sha256 hex>","vector":[0.1,-0.2,...]}
//
// Vectors are written with shortest round-trip formatting. The loader parses
// the writer's own line layout directly and falls back to a full JSON parse
// for anything else.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/corpus.hpp"
#include "sage/digest.hpp"
#include "sage/error.hpp"
#include "sage/metric.hpp"

namespace sage {

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::string model) : model_(std::move(model)) {}

  [[nodiscard]] const std::string& model() const noexcept { return model_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return by_key_.size(); }

  static std::string key_for(std::string_view text) { return sha256_hex(text); }

  [[nodiscard]] const EmbeddingVector* find(std::string_view text) const { return find_key(key_for(text)); }

  [[nodiscard]] const EmbeddingVector* find_key(const std::string& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &it->second;
  }

  /// Adds `v` for `text` unless present. All vectors must share one dimension.
  void insert(std::string_view text, EmbeddingVector v) { insert_key(key_for(text), std::move(v)); }

  void insert_key(std::string key, EmbeddingVector v) {
    if (dim_ == 0) {
      dim_ = v.dim();
    } else if (v.dim() != dim_) {
      throw InputError("embedding store: dimension " + std::to_string(v.dim()) + " does not match " +
                       std::to_string(dim_));
    }
    if (by_key_.try_emplace(key, std::move(v)).second) order_.push_back(std::move(key));
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << nlohmann::json{{"schema", schema::kEmbeddings}, {"version", schema::kVersion}, {"model", model_},
                            {"dim", dim_}}
                 .dump()
          << '\n';
      std::string line;
      char buf[32];
      for (const auto& key : order_) {
        line.assign("{\"key\":\"").append(key).append("\",\"vector\":[");
        const auto comps = by_key_.at(key).components();
        for (std::size_t k = 0; k < comps.size(); ++k) {
          if (k) line.push_back(',');
          auto [end, ec] = std::to_chars(buf, buf + sizeof buf, comps[k]);
          line.append(buf, end);
        }
        line.append("]}\n");
        out << line;
      }
      out.flush();
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  /// Loads a sidecar. When `expected_model` is non-empty it must match the
  /// file's model.
  static EmbeddingStore load(const std::filesystem::path& path, std::string_view expected_model = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    EmbeddingStore store;
    bool header_seen = false;
    std::vector<double> scratch;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
      if (!header_seen) {
        nlohmann::json h;
        try {
          h = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
          throw SchemaError(where() + ": malformed header");
        }
        if (!h.is_object() || h.value("schema", std::string()) != schema::kEmbeddings) {
          throw SchemaError(path.string() + ": not an embeddings file");
        }
        if (h.value("version", 0) != schema::kVersion) throw SchemaError(path.string() + ": unsupported version");
        store.model_ = h.value("model", std::string());
        if (!expected_model.empty() && store.model_ != expected_model) {
          throw SchemaError(path.string() + ": embeddings were produced by '" + store.model_ + "', expected '" +
                            std::string(expected_model) + "'");
        }
        header_seen = true;
        continue;
      }
      std::string key;
      if (!parse_fast(line, key, scratch)) parse_slow(line, key, scratch, where());
      try {
        store.insert_key(std::move(key), EmbeddingVector(scratch));
      } catch (const InputError& e) {
        throw SchemaError(where() + ": " + e.what());
      }
    }
    if (!header_seen) throw SchemaError(path.string() + ": missing header line");
    return store;
  }

 private:
  static bool parse_fast(std::string_view line, std::string& key, std::vector<double>& out) {
    constexpr std::string_view kKey = "{\"key\":\"";
    constexpr std::string_view kVec = "\",\"vector\":[";
    if (line.substr(0, kKey.size()) != kKey) return false;
    const auto key_end = line.find('"', kKey.size());
    if (key_end == std::string_view::npos) return false;
    if (line.substr(key_end, kVec.size()) != kVec) return false;
    key.assign(line.substr(kKey.size(), key_end - kKey.size()));
    out.clear();
    const char* p = line.data() + key_end + kVec.size();
    const char* end = line.data() + line.size();
    if (p < end && *p == ']') return line.substr(static_cast<std::size_t>(p - line.data())) == "]}";
    while (p < end) {
      double x;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc()) return false;
      out.push_back(x);
      p = next;
      if (p < end && *p == ',') {
        ++p;
        continue;
      }
      return std::string_view(p, static_cast<std::size_t>(end - p)) == "]}";
    }
    return false;
  }

  static void parse_slow(const std::string& line, std::string& key, std::vector<double>& out,
                         const std::string& where) {
    try {
      const auto j = nlohmann::json::parse(line);
      key = j.at("key").get<std::string>();
      out = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": malformed embedding line: " + e.what());
    }
  }

  std::string model_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, EmbeddingVector> by_key_;
  std::vector<std::string> order_;
};

}  // namespace sage
