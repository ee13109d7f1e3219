// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lexical and semantic pairwise similarity, the pairwise consistency
// baseline, and paraphrase quality scoring.
//
// Tokenization is fixed: ASCII-lowercase, drop ASCII punctuation, split on
// whitespace. All lexical scores are computed on these tokens.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sage/error.hpp"
#include "sage/metric.hpp"

namespace sage {

using Tokens = std::vector<std::string>;

inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (uc < 0x80 && std::ispunct(uc)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline Tokens tokenize_nonempty(std::string_view text, const char* what) {
  Tokens t = tokenize(text);
  if (t.empty()) throw InputError(std::string(what) + ": text is empty after tokenization");
  return t;
}

inline std::map<std::vector<std::string_view>, int> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string_view>, int> counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::vector<std::string_view> key(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[key];
  }
  return counts;
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t levenshtein(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

/// Sentence BLEU over orders 1-4 on pre-tokenized input.
///
/// Modified precisions are clipped by reference counts. An order n >= 2 with
/// no matching n-gram is smoothed to 1 / (candidate n-grams + 1); a zero
/// unigram match gives a score of exactly 0. Brevity penalty exp(1 - r/c)
/// applies when the candidate is shorter than the reference.
inline double bleu(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) throw InputError("bleu: empty input");
  constexpr std::size_t kMaxOrder = 4;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const auto cand = detail::ngram_counts(candidate, n);
    const auto ref = detail::ngram_counts(reference, n);
    const double total = candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1) : 0.0;
    double matched = 0.0;
    for (const auto& [gram, count] : cand) {
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    double precision;
    if (n == 1) {
      if (matched == 0.0) return 0.0;
      precision = matched / total;
    } else if (matched == 0.0) {
      precision = 1.0 / (total + 1.0);
    } else {
      precision = matched / total;
    }
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(kMaxOrder)), 0.0, 1.0);
}

inline double bleu(std::string_view candidate, std::string_view reference) {
  return bleu(detail::tokenize_nonempty(candidate, "bleu"), detail::tokenize_nonempty(reference, "bleu"));
}

/// ROUGE-L F1 (LCS based).
inline double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) throw InputError("rouge_l: empty input");
  const auto lcs = static_cast<double>(detail::lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

inline double rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l(detail::tokenize_nonempty(candidate, "rouge_l"),
                 detail::tokenize_nonempty(reference, "rouge_l"));
}

/// Token-level Levenshtein distance divided by the longer length.
inline double lexical_divergence(std::string_view a, std::string_view b) {
  const Tokens ta = detail::tokenize_nonempty(a, "lexical_divergence");
  const Tokens tb = detail::tokenize_nonempty(b, "lexical_divergence");
  return static_cast<double>(detail::levenshtein(ta, tb)) /
         static_cast<double>(std::max(ta.size(), tb.size()));
}

/// Maps a text to its sentence embedding.
using EmbedFn = std::function<EmbeddingVector(std::string_view)>;

/// Pairwise text similarity in [0, 1].
class SimilarityBackend {
 public:
  enum class Kind { kBleu, kRougeL, kSemanticCosine };

  static SimilarityBackend lexical_bleu() { return SimilarityBackend(Kind::kBleu, {}); }
  static SimilarityBackend lexical_rouge_l() { return SimilarityBackend(Kind::kRougeL, {}); }
  static SimilarityBackend semantic_cosine(EmbedFn embed) {
    if (!embed) throw InputError("semantic-cosine backend requires an embedding source");
    return SimilarityBackend(Kind::kSemanticCosine, std::move(embed));
  }

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] bool symmetric() const noexcept { return kind_ != Kind::kBleu; }

  [[nodiscard]] std::string_view name() const noexcept {
    switch (kind_) {
      case Kind::kBleu: return "bleu";
      case Kind::kRougeL: return "rouge-l";
      case Kind::kSemanticCosine: return "semantic-cosine";
    }
    return "?";
  }

  [[nodiscard]] double score(std::string_view a, std::string_view b) const {
    switch (kind_) {
      case Kind::kBleu: return bleu(a, b);
      case Kind::kRougeL: return rouge_l(a, b);
      case Kind::kSemanticCosine: return std::max(0.0, cosine_similarity(embed(a), embed(b)));
    }
    return 0.0;
  }

  [[nodiscard]] EmbeddingVector embed(std::string_view text) const {
    if (!embed_) throw InputError(std::string(name()) + " backend has no embedding source");
    return embed_(text);
  }

 private:
  SimilarityBackend(Kind kind, EmbedFn embed) : kind_(kind), embed_(std::move(embed)) {}

  Kind kind_;
  EmbedFn embed_;
};

/// Mean similarity over unordered pairs. Asymmetric backends are scored in
/// both directions and the two directions averaged.
inline double pairwise_consistency(std::span<const std::string> texts, const SimilarityBackend& backend) {
  const std::size_t n = texts.size();
  if (n < 2) throw InputError("pairwise_consistency needs at least 2 texts");

  double sum = 0.0;
  std::vector<EmbeddingVector> emb;
  std::vector<Tokens> tok;
  if (backend.kind() == SimilarityBackend::Kind::kSemanticCosine) {
    emb.reserve(n);
    for (const auto& t : texts) emb.push_back(backend.embed(t));
  } else {
    tok.reserve(n);
    for (const auto& t : texts) tok.push_back(detail::tokenize_nonempty(t, "pairwise_consistency"));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      switch (backend.kind()) {
        case SimilarityBackend::Kind::kBleu:
          sum += 0.5 * (bleu(tok[i], tok[j]) + bleu(tok[j], tok[i]));
          break;
        case SimilarityBackend::Kind::kRougeL:
          sum += rouge_l(tok[i], tok[j]);
          break;
        case SimilarityBackend::Kind::kSemanticCosine:
          sum += std::max(0.0, cosine_similarity(emb[i], emb[j]));
          break;
      }
    }
  }
  return sum / static_cast<double>(n * (n - 1) / 2);
}

struct ParaphraseCandidate {
  std::string text;
  double semantic_sim = 0.0;
  double lexical_div = 0.0;
  double quality = 0.0;
};

inline constexpr double kDefaultQualityBeta = 0.7;
inline constexpr double kDefaultQualityThreshold = 0.8;

/// quality = beta * semantic_sim + (1 - beta) * lexical_divergence(source, candidate)
inline ParaphraseCandidate paraphrase_quality(std::string_view source, std::string_view candidate,
                                              double semantic_sim, double beta = kDefaultQualityBeta) {
  if (!(semantic_sim >= 0.0 && semantic_sim <= 1.0)) {
    throw InputError("paraphrase_quality: semantic_sim must lie in [0, 1]");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("paraphrase_quality: beta must lie in [0, 1]");
  ParaphraseCandidate c;
  c.text = std::string(candidate);
  c.semantic_sim = semantic_sim;
  c.lexical_div = lexical_divergence(source, candidate);
  c.quality = beta * semantic_sim + (1.0 - beta) * c.lexical_div;
  return c;
}

/// Keeps candidates with quality strictly above the threshold, in order.
inline std::vector<ParaphraseCandidate> filter_paraphrases(std::span<const ParaphraseCandidate> candidates,
                                                           double threshold = kDefaultQualityThreshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InputError("filter_paraphrases: threshold must lie in [0, 1]");
  std::vector<ParaphraseCandidate> kept;
  std::copy_if(candidates.begin(), candidates.end(), std::back_inserter(kept),
               [threshold](const ParaphraseCandidate& c) { return c.quality > threshold; });
  return kept;
}

}  // namespace sage
