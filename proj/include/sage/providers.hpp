// SPDX-License-Identifier: Apache-2.0
#pragma once

// Chat and embedding provider interfaces plus the deterministic offline
// stubs. Providers signal failures with ProviderError; retryable() marks
// transport failures and throttling.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sage/digest.hpp"
#include "sage/error.hpp"
#include "sage/templates.hpp"
#include "sage/text.hpp"

namespace sage {

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 256;
  std::uint32_t sample_index = 0;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// One vector per input text, in input order.
  virtual std::vector<std::vector<double>> embed(const std::string& model, std::span<const std::string> texts) = 0;
};

class CallbackChatProvider final : public ChatProvider {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit CallbackChatProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

class CallbackEmbeddingProvider final : public EmbeddingProvider {
 public:
  using Fn = std::function<std::vector<std::vector<double>>(const std::string&, std::span<const std::string>)>;
  explicit CallbackEmbeddingProvider(Fn fn) : fn_(std::move(fn)) {}
  std::vector<std::vector<double>> embed(const std::string& model, std::span<const std::string> texts) override {
    return fn_(model, texts);
  }

 private:
  Fn fn_;
};

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double unit_interval(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace detail

enum class StubMode {
  kFixed,              // every prompt answered with `fixed_text`
  kConstant,           // constant answers and RoTs, real paraphrases
  kDigest,             // text is a pure function of the prompt
  kTemperatureScaled,  // like kDigest, with per-sample noise growing with temperature
};

struct StubOptions {
  StubMode mode = StubMode::kDigest;
  std::uint64_t seed = 0;
  std::string fixed_text = "This is a fixed response.";
  std::string constant_answer = "It is wrong to hurt other people without a good reason.";
  std::string constant_rot = "You should not hurt other people without a good reason.";
  std::size_t answer_words = 12;
  std::size_t paraphrase_lines = 5;
  /// Temperature at which every token of a temperature-scaled draw is noise.
  double temperature_ceiling = 2.0;
};

/// Deterministic offline chat provider. Recognises the pipeline templates:
/// paraphrase prompts are answered with seeded word shuffles of the
/// question, the other templates according to `mode`.
///
/// In kTemperatureScaled mode each token position i of a response to prompt
/// P is, for draw s at temperature T, replaced by a token unique to (s, i)
/// whenever u(P, s, i) < min(1, T / temperature_ceiling). The replaced set
/// only grows with T, so agreement between draws can only fall.
class StubChatProvider final : public ChatProvider {
 public:
  explicit StubChatProvider(StubOptions options = {}) : opt_(std::move(options)) {}

  [[nodiscard]] const StubOptions& options() const noexcept { return opt_; }

  std::string complete(const ChatRequest& req) override {
    if (opt_.mode == StubMode::kFixed) return opt_.fixed_text;

    const auto recognized = prompts::recognize(req.prompt);
    if (!recognized) return words_for(req.prompt, req);

    const auto& b = recognized->bindings;
    switch (recognized->kind) {
      case TemplateKind::kParaphrase: return paraphrases_for(b.at("question"));
      case TemplateKind::kAnswer:
        if (opt_.mode == StubMode::kConstant) return opt_.constant_answer;
        return capitalize(words_for(req.prompt, req)) + ".";
      case TemplateKind::kAnswerWithRot:
        if (opt_.mode == StubMode::kConstant) return "Keeping in mind that " + b.at("rot") + " " + opt_.constant_answer;
        return "Keeping in mind that " + b.at("rot") + " " + words_for(req.prompt, req) + ".";
      case TemplateKind::kRot:
        if (opt_.mode == StubMode::kConstant) return opt_.constant_rot;
        return "You should " + words_for(req.prompt, req) + ".";
    }
    return words_for(req.prompt, req);
  }

 private:
  static constexpr std::string_view kVocab[] = {
      "help",   "others", "always", "never",  "honest",  "people", "kind",    "family", "friends", "money",
      "work",   "truth",  "care",   "respect", "trust",  "share",  "promise", "keep",   "time",    "fair",
      "rules",  "harm",   "avoid",  "support", "listen", "choose", "wisely",  "give",   "take",    "small",
      "good",   "bad",    "right",  "wrong",  "should",  "must",   "learn",   "forgive", "protect", "yourself",
      "the",    "a",      "to",     "and",    "when",    "if",     "it",      "is",     "be",      "your",
      "public", "home",   "anger",  "calm",   "patient", "duty",   "safety",  "law",    "health",  "peace",
      "advice", "lie",    "steal",  "defend"};

  [[nodiscard]] std::string words_for(std::string_view prompt, const ChatRequest& req) const {
    const std::uint64_t base = fnv1a64(prompt, fnv1a64("sage-stub") ^ opt_.seed);
    double noise = 0.0;
    if (opt_.mode == StubMode::kTemperatureScaled && opt_.temperature_ceiling > 0.0) {
      noise = std::clamp(req.temperature / opt_.temperature_ceiling, 0.0, 1.0);
    }
    std::vector<std::string> words;
    words.reserve(opt_.answer_words);
    for (std::size_t i = 0; i < opt_.answer_words; ++i) {
      const std::uint64_t hw = detail::mix64(base + i);
      const std::uint64_t hu = detail::mix64(base ^ detail::mix64((std::uint64_t{req.sample_index} << 32) + i));
      if (noise > 0.0 && detail::unit_interval(hu) < noise) {
        words.push_back("s" + std::to_string(req.sample_index) + "w" + std::to_string(i));
      } else {
        words.emplace_back(kVocab[hw % std::size(kVocab)]);
      }
    }
    return detail::join_words(words);
  }

  [[nodiscard]] std::string paraphrases_for(const std::string& question) const {
    const auto words = detail::split_words(question);
    std::string out;
    for (std::size_t line = 0; line < opt_.paraphrase_lines; ++line) {
      auto shuffled = words;
      std::mt19937_64 rng(fnv1a64(question, opt_.seed + line + 1));
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      if (!out.empty()) out.push_back('\n');
      out += std::to_string(line + 1) + ". " + detail::join_words(shuffled);
    }
    return out;
  }

  static std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
  }

  StubOptions opt_;
};

/// Deterministic offline embedder: the embedding of a text is the sum of
/// seeded Gaussian vectors, one per token, so lexical overlap shows up as
/// cosine similarity. Word order does not matter.
class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit StubEmbeddingProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw InputError("stub embedder dimension must be positive");
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

  std::vector<std::vector<double>> embed(const std::string& /*model*/, std::span<const std::string> texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  [[nodiscard]] std::vector<double> embed_one(std::string_view text) const {
    Tokens tokens = tokenize(text);
    if (tokens.empty()) tokens.emplace_back(text);
    std::vector<double> v(dim_, 0.0);
    for (const auto& tok : tokens) {
      std::mt19937_64 rng(fnv1a64(tok, fnv1a64("sage-embed") ^ seed_));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (double& x : v) x += gauss(rng);
    }
    return v;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace sage
