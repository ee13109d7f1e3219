// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sage/cache.hpp"
#include "sage/digest.hpp"
#include "sage/error.hpp"
#include "sage/metric.hpp"
#include "sage/providers.hpp"
#include "sage/templates.hpp"

namespace sage {

struct GenerationConfig {
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 256;
  std::uint32_t sample_index = 0;

  void validate() const {
    if (model_id.empty()) throw InputError("generation config: model id is empty");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
      throw InputError("generation config: temperature must be a finite value >= 0");
    }
    if (max_tokens <= 0) throw InputError("generation config: max_tokens must be positive");
  }
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};

  [[nodiscard]] std::chrono::milliseconds backoff(int attempt) const {
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1);
    return std::chrono::milliseconds(static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
  }
};

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;
  std::size_t max_in_flight = 8;
  RetryPolicy retry;
  std::string embedding_model = "stub-embedder";
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct GatewayStats {
  std::uint64_t cache_hits = 0;
  std::uint64_t provider_calls = 0;  // attempts, including retries
  std::uint64_t retries = 0;
  std::size_t max_in_flight_observed = 0;
};

/// Shared entry point to chat and embedding providers. Thread safe.
///
/// Every response is cached under sha256(kind, model, input, temperature,
/// sample index); concurrent identical requests are coalesced so that each
/// key reaches a provider at most once. At most `max_in_flight` provider
/// calls run at any instant.
class Gateway {
 public:
  static constexpr std::size_t kMaxInFlightLimit = 1024;

  Gateway(std::shared_ptr<ChatProvider> chat, std::shared_ptr<EmbeddingProvider> embedder, GatewayOptions options = {})
      : chat_(std::move(chat)),
        embedder_(std::move(embedder)),
        opt_(std::move(options)),
        cache_(opt_.cache_dir),
        slots_(static_cast<std::ptrdiff_t>(checked_limit(opt_.max_in_flight))) {
    if (opt_.retry.max_attempts < 1) throw InputError("retry policy needs at least one attempt");
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  [[nodiscard]] const GatewayOptions& options() const noexcept { return opt_; }

  static std::string chat_key(std::string_view prompt, const GenerationConfig& c) {
    return make_key({"chat", c.model_id, prompt, format_real(c.temperature), std::to_string(c.sample_index)});
  }

  static std::string embedding_key(std::string_view model, std::string_view text) {
    return make_key({"embedding", model, text, "0", "0"});
  }

  std::string chat_complete(std::string_view prompt, const GenerationConfig& config) {
    if (prompt.empty()) throw InputError("chat_complete: empty prompt");
    config.validate();
    if (!chat_) throw InputError("no chat provider configured");
    const std::string key = chat_key(prompt, config);

    auto value = resolve(key, [&] {
      ChatRequest req{config.model_id, std::string(prompt), config.temperature, config.max_tokens,
                      config.sample_index};
      std::string text = with_retries("chat completion", [&] { return chat_->complete(req); });
      if (trim(text).empty()) throw ProviderError("empty completion from model " + config.model_id, false);
      return CacheValue{std::move(text)};
    });
    return std::get<std::string>(value);
  }

  /// Embeds a batch; cached texts are not re-sent.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) {
    if (texts.empty()) throw InputError("embed: empty batch");
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].empty()) throw InputError("embed: text " + std::to_string(i) + " is empty");
    }
    if (!embedder_) throw InputError("no embedding provider configured");

    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) keys[i] = embedding_key(opt_.embedding_model, texts[i]);

    // Claim every missing key; keys owned by another caller are waited on.
    std::vector<std::size_t> owned;
    std::vector<std::promise<CacheValue>> promises;
    std::unordered_map<std::string, std::shared_future<CacheValue>> waits;
    {
      std::lock_guard lock(pending_mu_);
      std::unordered_set<std::string> seen;
      for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!seen.insert(keys[i]).second) continue;
        if (cache_.get(keys[i])) {
          ++cache_hits_;
          continue;
        }
        if (auto it = pending_.find(keys[i]); it != pending_.end()) {
          waits.emplace(keys[i], it->second);
          continue;
        }
        promises.emplace_back();
        pending_.emplace(keys[i], promises.back().get_future().share());
        owned.push_back(i);
      }
    }

    if (!owned.empty()) {
      std::vector<std::string> batch;
      batch.reserve(owned.size());
      for (auto i : owned) batch.push_back(texts[i]);
      try {
        auto vectors = with_retries("embedding", [&] { return embedder_->embed(opt_.embedding_model, batch); });
        if (vectors.size() != batch.size()) {
          throw ProviderError("embedding provider returned " + std::to_string(vectors.size()) + " vectors for " +
                                  std::to_string(batch.size()) + " inputs",
                              false);
        }
        for (std::size_t k = 1; k < vectors.size(); ++k) {
          if (vectors[k].size() != vectors[0].size()) {
            throw ProviderError("embedding provider returned inconsistent dimensions", false);
          }
        }
        for (std::size_t k = 0; k < owned.size(); ++k) {
          auto stored = cache_.put(keys[owned[k]], CacheValue{std::move(vectors[k])});
          promises[k].set_value(std::move(stored));
        }
      } catch (...) {
        for (auto& p : promises) {
          try {
            p.set_exception(std::current_exception());
          } catch (const std::future_error&) {
          }
        }
        release(keys, owned);
        throw;
      }
      release(keys, owned);
    }
    for (auto& [key, fut] : waits) fut.get();

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto v = cache_.get(keys[i]);
      if (!v) throw ProviderError("embedding for text " + std::to_string(i) + " is missing", false);
      out.emplace_back(std::get<std::vector<double>>(*v));
      if (out.back().dim() != out.front().dim()) throw ProviderError("embeddings differ in dimension", false);
    }
    return out;
  }

  EmbeddingVector embed_one(std::string_view text) {
    const std::string t(text);
    return std::move(embed(std::span<const std::string>(&t, 1)).front());
  }

  /// Renders the paraphrase template and parses up to `k` candidates, one per
  /// enumerated line. Falls back to plain lines when nothing is enumerated.
  std::vector<std::string> generate_paraphrases(std::string_view question, std::size_t k,
                                                const GenerationConfig& config) {
    if (trim(question).empty()) throw InputError("generate_paraphrases: empty question");
    if (k < 1) throw InputError("generate_paraphrases: k must be at least 1");
    const std::string completion = chat_complete(prompts::render_paraphrase(question), config);
    return parse_paraphrases(completion, question, k);
  }

  std::string generate_answer(std::string_view question, const GenerationConfig& config) {
    if (trim(question).empty()) throw InputError("generate_answer: empty question");
    return std::string(trim(chat_complete(prompts::render_answer(question), config)));
  }

  std::string generate_answer_with_rot(std::string_view question, std::string_view rot,
                                       const GenerationConfig& config) {
    if (trim(question).empty()) throw InputError("generate_answer_with_rot: empty question");
    if (trim(rot).empty()) throw InputError("generate_answer_with_rot: empty rule of thumb");
    return std::string(trim(chat_complete(prompts::render_answer_with_rot(question, rot), config)));
  }

  /// Returns the first non-empty line of the completion, trimmed.
  std::string generate_rot(std::string_view question, std::string_view answer, const GenerationConfig& config) {
    if (trim(question).empty()) throw InputError("generate_rot: empty question");
    if (trim(answer).empty()) throw InputError("generate_rot: empty answer");
    const std::string completion = chat_complete(prompts::render_rot(question, answer), config);
    for (auto line : split_lines(completion)) {
      line = trim(line);
      constexpr std::string_view kLabel = "Rule of Thumb:";
      if (line.substr(0, kLabel.size()) == kLabel) line = trim(line.substr(kLabel.size()));
      if (!line.empty()) return std::string(line);
    }
    throw ProviderError("empty rule-of-thumb completion", false);
  }

  [[nodiscard]] GatewayStats stats() const {
    GatewayStats s;
    s.cache_hits = cache_hits_.load();
    s.provider_calls = provider_calls_.load();
    s.retries = retries_.load();
    s.max_in_flight_observed = max_in_flight_observed_.load();
    return s;
  }

  [[nodiscard]] std::size_t cache_size() const { return cache_.size(); }

  static std::vector<std::string> parse_paraphrases(std::string_view completion, std::string_view source,
                                                    std::size_t k) {
    std::vector<std::string_view> lines;
    for (auto line : split_lines(completion)) {
      if (!trim(line).empty()) lines.push_back(trim(line));
    }
    if (lines.empty()) throw ProviderError("paraphrase completion contains no candidate lines", false);

    std::vector<std::string_view> enumerated;
    for (auto line : lines) {
      if (auto body = strip_enumeration(line)) enumerated.push_back(*body);
    }
    const auto& candidates = enumerated.empty() ? lines : enumerated;

    const auto src = trim(source);
    std::vector<std::string> out;
    for (auto c : candidates) {
      if (out.size() >= k) break;
      c = trim(c);
      if (c.empty() || c == src) continue;
      if (std::find(out.begin(), out.end(), c) != out.end()) continue;
      out.emplace_back(c);
    }
    return out;
  }

 private:
  static std::size_t checked_limit(std::size_t n) {
    if (n < 1 || n > kMaxInFlightLimit) throw InputError("max_in_flight must lie in [1, 1024]");
    return n;
  }

  static std::string format_real(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
  }

  static std::string make_key(std::initializer_list<std::string_view> parts) {
    std::string material;
    for (auto p : parts) {
      material += std::to_string(p.size());
      material.push_back(':');
      material += p;
    }
    return sha256_hex(material);
  }

  static std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  }

  static std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      auto nl = s.find('\n', pos);
      if (nl == std::string_view::npos) nl = s.size();
      out.push_back(s.substr(pos, nl - pos));
      pos = nl + 1;
    }
    return out;
  }

  /// "1. text", "2) text", "- text", "* text" -> "text".
  static std::optional<std::string_view> strip_enumeration(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) return trim(line.substr(i + 1));
    if (i == 0 && !line.empty() && (line[0] == '-' || line[0] == '*') && line.size() > 1 && line[1] == ' ') {
      return trim(line.substr(1));
    }
    return std::nullopt;
  }

  template <class Fn>
  CacheValue resolve(const std::string& key, Fn&& fetch) {
    std::promise<CacheValue> promise;
    std::shared_future<CacheValue> wait;
    {
      std::lock_guard lock(pending_mu_);
      if (auto v = cache_.get(key)) {
        ++cache_hits_;
        return *v;
      }
      if (auto it = pending_.find(key); it != pending_.end()) {
        wait = it->second;
      } else {
        pending_.emplace(key, promise.get_future().share());
      }
    }
    if (wait.valid()) return wait.get();

    try {
      auto stored = cache_.put(key, fetch());
      promise.set_value(stored);
      std::lock_guard lock(pending_mu_);
      pending_.erase(key);
      return stored;
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(pending_mu_);
      pending_.erase(key);
      throw;
    }
  }

  void release(const std::vector<std::string>& keys, const std::vector<std::size_t>& owned) {
    std::lock_guard lock(pending_mu_);
    for (auto i : owned) pending_.erase(keys[i]);
  }

  template <class Fn>
  auto with_retries(std::string_view what, Fn&& call) -> decltype(call()) {
    for (int attempt = 1;; ++attempt) {
      try {
        slots_.acquire();
        struct Release {
          Gateway* g;
          ~Release() {
            --g->in_flight_;
            g->slots_.release();
          }
        } guard{this};
        const std::size_t now = ++in_flight_;
        std::size_t prev = max_in_flight_observed_.load();
        while (now > prev && !max_in_flight_observed_.compare_exchange_weak(prev, now)) {
        }
        ++provider_calls_;
        return call();
      } catch (const ProviderError& e) {
        if (!e.retryable()) throw;
        if (attempt >= opt_.retry.max_attempts) {
          throw RetryExhaustedError(std::string(what) + " failed after " + std::to_string(attempt) +
                                        " attempts: " + e.what(),
                                    attempt);
        }
        ++retries_;
        opt_.sleep(opt_.retry.backoff(attempt));
      }
    }
  }

  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  GatewayOptions opt_;
  ResponseCache cache_;

  std::counting_semaphore<kMaxInFlightLimit> slots_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_observed_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> provider_calls_{0};
  std::atomic<std::uint64_t> retries_{0};

  std::mutex pending_mu_;
  std::unordered_map<std::string, std::shared_future<CacheValue>> pending_;
};

}  // namespace sage
