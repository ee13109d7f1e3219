// SPDX-License-Identifier: Apache-2.0
// Scores a handful of answers to paraphrases of one question, offline.

#include <cstdio>
#include <string>
#include <vector>

#include "sage/metric.hpp"
#include "sage/providers.hpp"
#include "sage/text.hpp"

int main() {
  const std::vector<std::string> answers{
      "Yes, it is acceptable to break a promise to protect someone from harm.",
      "Breaking a promise is acceptable when it protects someone from harm.",
      "No. A promise should always be kept, whatever the consequences.",
  };

  sage::StubEmbeddingProvider embedder;
  std::vector<sage::EmbeddingVector> vectors;
  for (auto& v : embedder.embed("stub", answers)) vectors.emplace_back(std::move(v));

  const auto g = sage::build_semantic_graph(vectors);
  const auto b = sage::sage_score(g);
  std::printf("entropy   %.4f nats\n", b.entropy_nats);
  std::printf("lambda    %.4f\n", b.scale_lambda);
  std::printf("sage      %.4f\n", b.sage);

  const auto bleu = sage::pairwise_consistency(answers, sage::SimilarityBackend::lexical_bleu());
  const auto rouge = sage::pairwise_consistency(answers, sage::SimilarityBackend::lexical_rouge_l());
  std::printf("bleu-cons %.4f\nrouge-l   %.4f\n", bleu, rouge);
}
