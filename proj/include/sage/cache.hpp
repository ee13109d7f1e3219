// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/error.hpp"

namespace sage {

using CacheValue = std::variant<std::string, std::vector<double>>;

struct CacheEntry {
  std::string key;
  CacheValue value;
  std::string created_at;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only response cache. In memory only when constructed without a
/// directory; otherwise every new entry is appended to
/// `<dir>/responses.jsonl` and earlier entries are loaded on construction.
/// The first value stored under a key wins.
class ResponseCache {
 public:
  static constexpr const char* kSchema = "sage.cache";
  static constexpr int kVersion = 1;
  static constexpr const char* kFileName = "responses.jsonl";

  ResponseCache() = default;

  explicit ResponseCache(std::optional<std::filesystem::path> dir) {
    if (!dir) return;
    std::filesystem::create_directories(*dir);
    path_ = *dir / kFileName;
    load();
    out_.open(*path_, std::ios::app | std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open cache file " + path_->string());
    if (std::filesystem::file_size(*path_) == 0) {
      out_ << nlohmann::json{{"schema", kSchema}, {"version", kVersion}}.dump() << '\n';
      out_.flush();
    } else if (!ends_with_newline(*path_)) {
      out_ << '\n';
    }
  }

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  [[nodiscard]] std::optional<CacheValue> get(const std::string& key) const {
    std::shared_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.value;
    return std::nullopt;
  }

  /// Stores `value` unless the key is already present; returns the stored value.
  CacheValue put(const std::string& key, CacheValue value) {
    std::unique_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.value;
    CacheEntry e{key, std::move(value), utc_timestamp()};
    if (out_.is_open()) {
      out_ << to_json(e).dump() << '\n';
      out_.flush();
    }
    auto [it, inserted] = entries_.emplace(key, std::move(e));
    return it->second.value;
  }

  [[nodiscard]] std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  [[nodiscard]] const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  static nlohmann::json to_json(const CacheEntry& e) {
    nlohmann::json j{{"key", e.key}, {"created_at", e.created_at}};
    if (const auto* s = std::get_if<std::string>(&e.value)) {
      j["text"] = *s;
    } else {
      j["vector"] = std::get<std::vector<double>>(e.value);
    }
    return j;
  }

  static bool ends_with_newline(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary | std::ios::ate);
    if (!in || in.tellg() == 0) return true;
    in.seekg(-1, std::ios::end);
    return in.get() == '\n';
  }

  void load() {
    std::ifstream in(*path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    std::streamoff line_start = 0;
    std::optional<std::streamoff> torn_at;
    while (std::getline(in, line)) {
      ++lineno;
      const std::streamoff start = line_start;
      line_start += static_cast<std::streamoff>(line.size()) + 1;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted run is cut off.
        if (in.peek() == std::char_traits<char>::eof()) {
          torn_at = start;
          break;
        }
        throw SchemaError(path_->string() + ":" + std::to_string(lineno) + ": malformed cache line");
      }
      if (lineno == 1 && j.contains("schema")) {
        if (j.at("schema") != kSchema) throw SchemaError(path_->string() + ": not a cache file");
        continue;
      }
      CacheEntry e;
      e.key = j.at("key").get<std::string>();
      e.created_at = j.value("created_at", "");
      if (j.contains("text")) {
        e.value = j.at("text").get<std::string>();
      } else {
        e.value = j.at("vector").get<std::vector<double>>();
      }
      entries_.try_emplace(e.key, std::move(e));
    }
    in.close();
    if (torn_at) std::filesystem::resize_file(*path_, static_cast<std::uintmax_t>(*torn_at));
  }

  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, CacheEntry> entries_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

}  // namespace sage
