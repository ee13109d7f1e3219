// SPDX-License-Identifier: Apache-2.0
#pragma once

/**
 * Semantic graph entropy kernel.
 *
 * A set of n sentence embeddings is turned into a complete weighted graph
 * whose edge weights are cosine similarities clamped to [0, 1]. Each vertex
 * carries an information functional f(v_i) = sum_j sim(i, j) (self included),
 * which induces the vertex distribution p_i = f_i / sum_j f_j. The graph
 * entropy H(p) is scaled by the mean pairwise cosine distance and normalised
 * by ln(n):
 *
 *   sage = 1 - (1 - mean_offdiag_sim) * H(p) / ln(n)
 *
 * so identical responses score 1 and mutually orthogonal responses score 0.
 * All logarithms are natural.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sage/error.hpp"

namespace sage {

/// A sentence embedding. Finite components, non-zero norm, dim >= 1.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> components)
      : components_(std::move(components)) {
    if (components_.empty()) {
      throw InputError("embedding must have at least one component");
    }
    double sq = 0.0;
    for (double c : components_) {
      if (!std::isfinite(c)) throw InputError("embedding has a non-finite component");
      sq += c * c;
    }
    if (!(sq > 0.0)) throw InputError("embedding has zero norm");
    squared_norm_ = sq;
  }

  EmbeddingVector(std::initializer_list<double> components)
      : EmbeddingVector(std::vector<double>(components)) {}

  [[nodiscard]] std::size_t dim() const noexcept { return components_.size(); }
  [[nodiscard]] std::span<const double> components() const noexcept { return components_; }
  [[nodiscard]] double squared_norm() const noexcept { return squared_norm_; }
  [[nodiscard]] double norm() const noexcept { return std::sqrt(squared_norm_); }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.components_ == b.components_;
  }

 private:
  std::vector<double> components_;
  double squared_norm_ = 0.0;
};

/// Cosine similarity in [-1, 1]. Identical vectors give exactly 1.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() == 0 || b.dim() == 0) throw InputError("cosine_similarity: empty embedding");
  if (a.dim() != b.dim()) {
    throw InputError("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  }
  const auto x = a.components();
  const auto y = b.components();
  double dot = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
  // sqrt(|a|^2 |b|^2) rather than |a||b|: for a == b the quotient is exactly 1.
  const double c = dot / std::sqrt(a.squared_norm() * b.squared_norm());
  return std::clamp(c, -1.0, 1.0);
}

/// Vertex distribution over a semantic graph; entries sum to 1.
struct ProbabilityVector {
  std::vector<double> p;

  [[nodiscard]] std::size_t size() const noexcept { return p.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return p[i]; }
};

/// Complete graph over n >= 2 embeddings with clamped cosine similarities.
/// Immutable once built.
class SemanticGraph {
 public:
  /// Builds the graph from embeddings; negative cosines are clamped to 0.
  static SemanticGraph from_embeddings(std::span<const EmbeddingVector> embeddings) {
    const std::size_t n = embeddings.size();
    if (n < 2) throw InputError("semantic graph needs at least 2 vertices, got " + std::to_string(n));
    const std::size_t dim = embeddings[0].dim();
    for (const auto& e : embeddings) {
      if (e.dim() == 0) throw InputError("semantic graph: invalid (empty) embedding");
      if (e.dim() != dim) throw InputError("semantic graph: embeddings differ in dimension");
    }
    SemanticGraph g;
    g.n_ = n;
    g.vertices_.assign(embeddings.begin(), embeddings.end());
    g.sim_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      g.sim_[i * n + i] = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double s = std::max(0.0, cosine_similarity(embeddings[i], embeddings[j]));
        g.sim_[i * n + j] = s;
        g.sim_[j * n + i] = s;
      }
    }
    return g;
  }

  /// Builds a graph directly from a row-major n x n similarity matrix. The
  /// matrix must be symmetric with unit diagonal and entries in [0, 1].
  static SemanticGraph from_similarity(std::size_t n, std::vector<double> sim) {
    if (n < 2) throw InputError("semantic graph needs at least 2 vertices, got " + std::to_string(n));
    if (sim.size() != n * n) throw InputError("similarity matrix has wrong size");
    for (std::size_t i = 0; i < n; ++i) {
      if (sim[i * n + i] != 1.0) throw InputError("similarity matrix diagonal must be 1");
      for (std::size_t j = 0; j < n; ++j) {
        const double s = sim[i * n + j];
        if (!(s >= 0.0 && s <= 1.0)) throw InputError("similarity entries must lie in [0, 1]");
        if (s != sim[j * n + i]) throw InputError("similarity matrix must be symmetric");
      }
    }
    SemanticGraph g;
    g.n_ = n;
    g.sim_ = std::move(sim);
    return g;
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }

  /// Empty when the graph was built from a similarity matrix.
  [[nodiscard]] const std::vector<EmbeddingVector>& vertices() const noexcept { return vertices_; }

  [[nodiscard]] double similarity(std::size_t i, std::size_t j) const { return sim_[i * n_ + j]; }
  [[nodiscard]] double distance(std::size_t i, std::size_t j) const { return 1.0 - similarity(i, j); }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(sim_).subspan(i * n_, n_);
  }

 private:
  SemanticGraph() = default;

  std::size_t n_ = 0;
  std::vector<EmbeddingVector> vertices_;
  std::vector<double> sim_;
};

inline SemanticGraph build_semantic_graph(std::span<const EmbeddingVector> embeddings) {
  return SemanticGraph::from_embeddings(embeddings);
}

/// f(v_i) = sum_j sim(i, j), self-similarity included; lies in [1, n].
inline double information_functional(const SemanticGraph& g, std::size_t i) {
  if (i >= g.size()) {
    throw InputError("vertex index " + std::to_string(i) + " out of range for graph of size " +
                     std::to_string(g.size()));
  }
  double f = 0.0;
  for (double s : g.row(i)) f += s;
  return f;
}

inline ProbabilityVector vertex_probabilities(const SemanticGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> f(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = information_functional(g, i);
    total += f[i];
  }
  for (double& v : f) v /= total;
  return ProbabilityVector{std::move(f)};
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double shannon_entropy(const ProbabilityVector& p) {
  double h = 0.0;
  for (double x : p.p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return std::max(0.0, h);
}

/// Mean similarity over the n(n-1) ordered off-diagonal pairs.
inline double mean_pairwise_similarity(const SemanticGraph& g) {
  const std::size_t n = g.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sum += g.similarity(i, j);
    }
  }
  return sum / static_cast<double>(n * (n - 1));
}

struct SageBreakdown {
  std::vector<double> f;
  ProbabilityVector p;
  double entropy_nats = 0.0;
  double mean_pairwise_sim = 0.0;
  double scale_lambda = 0.0;
  double scaled_entropy = 0.0;
  double raw_sage = 0.0;  // before clipping to [0, 1]
  double sage = 0.0;
};

inline SageBreakdown sage_score(const SemanticGraph& g) {
  const std::size_t n = g.size();
  if (n < 2) throw InputError("sage_score needs at least 2 vertices");

  SageBreakdown out;
  out.f.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.f[i] = information_functional(g, i);
    total += out.f[i];
  }
  out.p.p.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.p.p[i] = out.f[i] / total;

  out.entropy_nats = shannon_entropy(out.p);
  out.mean_pairwise_sim = mean_pairwise_similarity(g);
  out.scale_lambda = 1.0 - out.mean_pairwise_sim;
  out.scaled_entropy = out.scale_lambda * out.entropy_nats;
  out.raw_sage = 1.0 - out.scaled_entropy / std::log(static_cast<double>(n));
  out.sage = std::clamp(out.raw_sage, 0.0, 1.0);
  return out;
}

/// Convenience: sage of a set of embeddings.
inline double sage(std::span<const EmbeddingVector> embeddings) {
  return sage_score(build_semantic_graph(embeddings)).sage;
}

}  // namespace sage
