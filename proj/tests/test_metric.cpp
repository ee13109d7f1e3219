// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracle/sage_oracle.hpp"
#include "sage/metric.hpp"

using sage::EmbeddingVector;

namespace {

std::vector<EmbeddingVector> wrap(const std::vector<oracle::Vec>& xs) {
  std::vector<EmbeddingVector> out;
  for (const auto& x : xs) out.emplace_back(x);
  return out;
}

std::vector<oracle::Vec> random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<oracle::Vec> xs(n, oracle::Vec(dim));
  for (auto& x : xs)
    for (auto& c : x) c = g(rng);
  return xs;
}

}  // namespace

TEST(EmbeddingVector, RejectsDegenerateInput) {
  EXPECT_THROW(EmbeddingVector(std::vector<double>{}), sage::InputError);
  EXPECT_THROW(EmbeddingVector({0.0, 0.0}), sage::InputError);
  EXPECT_THROW(EmbeddingVector({1.0, NAN}), sage::InputError);
  EXPECT_THROW(EmbeddingVector({1.0, INFINITY}), sage::InputError);
}

TEST(Cosine, IdenticalIsExactlyOne) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_set(rng, 1, 17)[0];
    EXPECT_EQ(sage::cosine_similarity(EmbeddingVector(x), EmbeddingVector(x)), 1.0);
  }
}

TEST(Cosine, DimensionMismatchThrows) {
  EXPECT_THROW(sage::cosine_similarity({1.0, 0.0}, {1.0, 0.0, 0.0}), sage::InputError);
}

TEST(SemanticGraph, NeedsTwoVertices) {
  std::vector<EmbeddingVector> one{{1.0, 2.0}};
  EXPECT_THROW(sage::build_semantic_graph(one), sage::InputError);
  EXPECT_THROW(sage::sage(std::span<const EmbeddingVector>{}), sage::InputError);
}

TEST(SemanticGraph, ClampsNegativeCosine) {
  std::vector<EmbeddingVector> v{{1.0, 0.0}, {-1.0, 0.0}};
  const auto g = sage::build_semantic_graph(v);
  EXPECT_EQ(g.similarity(0, 1), 0.0);
  EXPECT_EQ(g.similarity(0, 0), 1.0);
  EXPECT_EQ(g.distance(0, 1), 1.0);
}

TEST(SemanticGraph, FromSimilarityValidates) {
  EXPECT_THROW(sage::SemanticGraph::from_similarity(2, {1, 0.5, 0.4, 1}), sage::InputError);
  EXPECT_THROW(sage::SemanticGraph::from_similarity(2, {0.9, 0.5, 0.5, 1}), sage::InputError);
  EXPECT_THROW(sage::SemanticGraph::from_similarity(2, {1, 1.5, 1.5, 1}), sage::InputError);
  EXPECT_NO_THROW(sage::SemanticGraph::from_similarity(2, {1, 0.5, 0.5, 1}));
}

// f = (2, 2, 1), p = (0.4, 0.4, 0.2), H = 1.0549201679861442 nats.
TEST(Sage, WorkedExampleTwoEqualOneOrthogonal) {
  std::vector<EmbeddingVector> v{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  const auto b = sage::sage_score(sage::build_semantic_graph(v));
  EXPECT_EQ(b.f, (std::vector<double>{2.0, 2.0, 1.0}));
  EXPECT_NEAR(b.p[0], 0.4, 1e-15);
  EXPECT_NEAR(b.p[2], 0.2, 1e-15);
  EXPECT_NEAR(b.entropy_nats, 1.0549201679861442, 1e-12);
  EXPECT_NEAR(b.mean_pairwise_sim, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.sage, 0.3598468547594925, 1e-12);
}

TEST(Sage, IdenticalGivesExactlyOne) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {2, 3, 7}) {
    const auto x = random_set(rng, 1, 32)[0];
    std::vector<EmbeddingVector> v(n, EmbeddingVector(x));
    EXPECT_EQ(sage::sage(v), 1.0);
  }
}

TEST(Sage, OrthogonalGivesZero) {
  for (std::size_t n : {2, 4, 9}) {
    std::vector<oracle::Vec> xs(n, oracle::Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) xs[i][i] = 1.0;
    EXPECT_NEAR(sage::sage(wrap(xs)), 0.0, 1e-12);
  }
}

TEST(Sage, EquicorrelatedEqualsCorrelation) {
  for (std::size_t n : {2, 3, 5, 10}) {
    for (int k = 0; k <= 10; ++k) {
      const double s = k / 10.0;
      EXPECT_NEAR(sage::sage(wrap(oracle::equicorrelated(n, s))), s, 1e-9) << "n=" << n << " s=" << s;
    }
  }
}

TEST(Sage, AgreesWithBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> nd(2, 10);
  for (int t = 0; t < 300; ++t) {
    const auto xs = random_set(rng, nd(rng), 8);
    EXPECT_NEAR(sage::sage(wrap(xs)), oracle::sage(xs), 1e-9);
  }
}

TEST(Sage, InvariantUnderPermutationAndScaling) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int t = 0; t < 100; ++t) {
    auto xs = random_set(rng, 6, 8);
    const double base = sage::sage(wrap(xs));
    std::shuffle(xs.begin(), xs.end(), rng);
    for (auto& x : xs) {
      const double c = scale(rng);
      for (auto& v : x) v *= c;
    }
    EXPECT_NEAR(sage::sage(wrap(xs)), base, 1e-12);
  }
}

TEST(Sage, BoundedAndRawKept) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    const auto b = sage::sage_score(sage::build_semantic_graph(wrap(random_set(rng, 5, 3))));
    EXPECT_GE(b.sage, 0.0);
    EXPECT_LE(b.sage, 1.0);
    EXPECT_EQ(b.sage, std::clamp(b.raw_sage, 0.0, 1.0));
    EXPECT_NEAR(std::accumulate(b.p.p.begin(), b.p.p.end(), 0.0), 1.0, 1e-12);
    EXPECT_LE(b.entropy_nats, std::log(5.0) + 1e-12);
  }
}

TEST(Sage, FromSimilarityMatchesOracle) {
  const std::vector<double> m{1, 0.9, 0.1, 0.9, 1, 0.3, 0.1, 0.3, 1};
  std::vector<std::vector<long double>> ml{{1, 0.9L, 0.1L}, {0.9L, 1, 0.3L}, {0.1L, 0.3L, 1}};
  EXPECT_NEAR(sage::sage_score(sage::SemanticGraph::from_similarity(3, m)).sage, oracle::sage_from_matrix(ml), 1e-12);
}

TEST(Entropy, ZeroTermsIgnored) {
  EXPECT_EQ(sage::shannon_entropy({{1.0, 0.0}}), 0.0);
  EXPECT_NEAR(sage::shannon_entropy({{0.5, 0.5}}), std::log(2.0), 1e-15);
}
