// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration. Loaded from a JSON file whose sections mirror the
// struct below; unknown keys are rejected. Credentials never live here: the
// API key is read from SAGE_API_KEY only.
//
//   {
//     "endpoint": {"url": "http://localhost:8000/v1", "embedding_url": ""},
//     "models":   {"generator": "...", "embedder": "...", "targets": ["..."], "rot": ""},
//     "paraphrase": {"k": 5, "threshold": 0.8, "beta": 0.7, "temperature": 1.0},
//     "generation": {"answer_temperature": 0.0, "rot_temperature": 0.0, "max_tokens": 256},
//     "scoring":  {"metrics": ["bleu", "rouge-l", "semantic-cosine-cons", "sage"], "target": "both"},
//     "runtime":  {"concurrency": 8, "cache_dir": ".sage-cache", "offline": false,
//                  "retry": {"max_attempts": 5, "initial_backoff_ms": 500}},
//     "stub":     {"mode": "digest", "seed": 0, "embedding_dim": 64},
//     "sweep":    {"temperatures": [0.0, 0.1, 0.5, 0.7, 0.9, 1.0, 1.5], "draws": 5}
//   }

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/analysis.hpp"
#include "sage/error.hpp"
#include "sage/gateway.hpp"
#include "sage/http_provider.hpp"
#include "sage/providers.hpp"

namespace sage {

enum class TargetSelection { kAnswers, kRots, kBoth };

inline TargetSelection parse_target_selection(std::string_view s) {
  if (s == "answers") return TargetSelection::kAnswers;
  if (s == "rots") return TargetSelection::kRots;
  if (s == "both") return TargetSelection::kBoth;
  throw InputError("unknown target selection '" + std::string(s) + "' (answers, rots or both)");
}

inline std::vector<Target> expand(TargetSelection t) {
  switch (t) {
    case TargetSelection::kAnswers: return {Target::kAnswers};
    case TargetSelection::kRots: return {Target::kRots};
    case TargetSelection::kBoth: return {Target::kAnswers, Target::kRots};
  }
  return {};
}

inline StubMode parse_stub_mode(std::string_view s) {
  if (s == "fixed") return StubMode::kFixed;
  if (s == "constant") return StubMode::kConstant;
  if (s == "digest") return StubMode::kDigest;
  if (s == "temperature") return StubMode::kTemperatureScaled;
  throw InputError("unknown stub mode '" + std::string(s) + "' (fixed, constant, digest or temperature)");
}

struct RunConfig {
  std::string endpoint;
  std::string embedding_endpoint;  // empty = endpoint

  std::string generator_model = "vicuna-13b-v1.5";
  std::string embedding_model = "nli-deberta-v3-base";
  std::vector<std::string> target_models;
  std::string rot_model;  // empty = each target model writes its own RoTs

  std::size_t paraphrases = 5;
  double quality_threshold = kDefaultQualityThreshold;
  double beta = kDefaultQualityBeta;
  double paraphrase_temperature = 1.0;

  double answer_temperature = 0.0;
  double rot_temperature = 0.0;
  int max_tokens = 256;

  std::vector<Metric> metrics = all_metrics();
  TargetSelection target = TargetSelection::kBoth;

  std::size_t concurrency = 8;
  std::filesystem::path cache_dir = ".sage-cache";
  bool offline = false;
  RetryPolicy retry;

  StubOptions stub;
  std::size_t stub_embedding_dim = StubEmbeddingProvider::kDefaultDim;

  std::vector<double> sweep_temperatures = default_temperature_grid();
  std::size_t sweep_draws = 5;

  void validate() const {
    if (!(quality_threshold >= 0.0 && quality_threshold <= 1.0)) throw InputError("config: threshold must lie in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("config: beta must lie in [0, 1]");
    if (paraphrases < 1) throw InputError("config: k (paraphrases) must be at least 1");
    if (concurrency < 1 || concurrency > Gateway::kMaxInFlightLimit) {
      throw InputError("config: concurrency must lie in [1, 1024]");
    }
    if (max_tokens < 1) throw InputError("config: max_tokens must be positive");
    for (double t : {paraphrase_temperature, answer_temperature, rot_temperature}) {
      if (!(t >= 0.0)) throw InputError("config: temperatures must be >= 0");
    }
    if (metrics.empty()) throw InputError("config: metrics list is empty");
    if (retry.max_attempts < 1) throw InputError("config: retry.max_attempts must be at least 1");
    if (sweep_draws < 2) throw InputError("config: sweep.draws must be at least 2");
    if (stub_embedding_dim < 1) throw InputError("config: stub.embedding_dim must be positive");
  }

  [[nodiscard]] ParaphraseSettings paraphrase_settings() const {
    return {paraphrases, quality_threshold, beta,
            GenerationConfig{generator_model, paraphrase_temperature, max_tokens, 0}};
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::string_view section, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw InputError("config: section '" + std::string(section) + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw InputError("config: unknown key '" + std::string(section) + (section.empty() ? "" : ".") + k + "'");
    }
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Overlays the settings present in `j` onto `cfg`.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  using detail::read;
  try {
    detail::reject_unknown(j, "", {"endpoint", "models", "paraphrase", "generation", "scoring", "runtime", "stub", "sweep"});
    if (j.contains("endpoint")) {
      const auto& s = j["endpoint"];
      detail::reject_unknown(s, "endpoint", {"url", "embedding_url"});
      read(s, "url", cfg.endpoint);
      read(s, "embedding_url", cfg.embedding_endpoint);
    }
    if (j.contains("models")) {
      const auto& s = j["models"];
      detail::reject_unknown(s, "models", {"generator", "embedder", "targets", "rot"});
      read(s, "generator", cfg.generator_model);
      read(s, "embedder", cfg.embedding_model);
      read(s, "targets", cfg.target_models);
      read(s, "rot", cfg.rot_model);
    }
    if (j.contains("paraphrase")) {
      const auto& s = j["paraphrase"];
      detail::reject_unknown(s, "paraphrase", {"k", "threshold", "beta", "temperature"});
      read(s, "k", cfg.paraphrases);
      read(s, "threshold", cfg.quality_threshold);
      read(s, "beta", cfg.beta);
      read(s, "temperature", cfg.paraphrase_temperature);
    }
    if (j.contains("generation")) {
      const auto& s = j["generation"];
      detail::reject_unknown(s, "generation", {"answer_temperature", "rot_temperature", "max_tokens"});
      read(s, "answer_temperature", cfg.answer_temperature);
      read(s, "rot_temperature", cfg.rot_temperature);
      read(s, "max_tokens", cfg.max_tokens);
    }
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      detail::reject_unknown(s, "scoring", {"metrics", "target"});
      if (s.contains("metrics")) {
        cfg.metrics.clear();
        for (const auto& m : s["metrics"]) cfg.metrics.push_back(parse_metric(m.get<std::string>()));
      }
      if (s.contains("target")) cfg.target = parse_target_selection(s["target"].get<std::string>());
    }
    if (j.contains("runtime")) {
      const auto& s = j["runtime"];
      detail::reject_unknown(s, "runtime", {"concurrency", "cache_dir", "offline", "retry"});
      read(s, "concurrency", cfg.concurrency);
      if (s.contains("cache_dir")) cfg.cache_dir = s["cache_dir"].get<std::string>();
      read(s, "offline", cfg.offline);
      if (s.contains("retry")) {
        const auto& r = s["retry"];
        detail::reject_unknown(r, "runtime.retry", {"max_attempts", "initial_backoff_ms"});
        read(r, "max_attempts", cfg.retry.max_attempts);
        if (r.contains("initial_backoff_ms")) {
          cfg.retry.initial_backoff = std::chrono::milliseconds(r["initial_backoff_ms"].get<long long>());
        }
      }
    }
    if (j.contains("stub")) {
      const auto& s = j["stub"];
      detail::reject_unknown(s, "stub", {"mode", "seed", "embedding_dim", "fixed_text", "constant_answer",
                                         "constant_rot", "temperature_ceiling"});
      if (s.contains("mode")) cfg.stub.mode = parse_stub_mode(s["mode"].get<std::string>());
      read(s, "seed", cfg.stub.seed);
      read(s, "embedding_dim", cfg.stub_embedding_dim);
      read(s, "fixed_text", cfg.stub.fixed_text);
      read(s, "constant_answer", cfg.stub.constant_answer);
      read(s, "constant_rot", cfg.stub.constant_rot);
      read(s, "temperature_ceiling", cfg.stub.temperature_ceiling);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      detail::reject_unknown(s, "sweep", {"temperatures", "draws"});
      read(s, "temperatures", cfg.sweep_temperatures);
      read(s, "draws", cfg.sweep_draws);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  RunConfig cfg;
  apply_json(cfg, j);
  cfg.validate();
  return cfg;
}

inline std::optional<std::string> env(const char* name) {
  if (const char* v = std::getenv(name); v && *v) return std::string(v);
  return std::nullopt;
}

/// Gateway for a run: stub providers when offline, HTTP providers otherwise.
inline std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg, bool persistent_cache = true) {
  GatewayOptions opt;
  if (persistent_cache && !cfg.cache_dir.empty()) opt.cache_dir = cfg.cache_dir;
  opt.max_in_flight = cfg.concurrency;
  opt.retry = cfg.retry;
  opt.embedding_model = cfg.embedding_model;

  if (cfg.offline) {
    return std::make_unique<Gateway>(std::make_shared<StubChatProvider>(cfg.stub),
                                     std::make_shared<StubEmbeddingProvider>(cfg.stub_embedding_dim, cfg.stub.seed),
                                     std::move(opt));
  }
  if (cfg.endpoint.empty()) {
    throw InputError("no endpoint configured: pass --endpoint, set SAGE_ENDPOINT, or use --offline");
  }
  HttpOptions http;
  http.api_key = env("SAGE_API_KEY");
  const auto chat_ep = Endpoint::parse(cfg.endpoint);
  const auto emb_ep = Endpoint::parse(cfg.embedding_endpoint.empty() ? cfg.endpoint : cfg.embedding_endpoint);
  return std::make_unique<Gateway>(std::make_shared<HttpChatProvider>(chat_ep, http),
                                   std::make_shared<HttpEmbeddingProvider>(emb_ep, http), std::move(opt));
}

}  // namespace sage
