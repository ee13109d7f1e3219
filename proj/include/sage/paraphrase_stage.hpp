// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/gateway.hpp"
#include "sage/text.hpp"

namespace sage {

struct ParaphraseSettings {
  std::size_t k = 5;
  double threshold = kDefaultQualityThreshold;
  double beta = kDefaultQualityBeta;
  GenerationConfig generation{"paraphraser", 1.0, 256, 0};
};

/// Generates up to k paraphrases of one question, scores each against the
/// source and keeps those above the quality threshold. The group is flagged
/// when fewer than two survive.
inline ParaphraseGroup build_paraphrase_group(Gateway& gateway, const QuestionRecord& q,
                                              const ParaphraseSettings& settings) {
  ParaphraseGroup g;
  g.question_id = q.id;
  g.source = q.question;
  const auto texts = gateway.generate_paraphrases(q.question, settings.k, settings.generation);

  std::vector<std::string> batch{q.question};
  for (const auto& t : texts) {
    if (!tokenize(t).empty()) batch.push_back(t);
  }
  if (batch.size() > 1) {
    const auto emb = gateway.embed(batch);
    for (std::size_t k = 1; k < batch.size(); ++k) {
      const double sim = std::max(0.0, cosine_similarity(emb[0], emb[k]));
      g.candidates.push_back(paraphrase_quality(q.question, batch[k], sim, settings.beta));
    }
  }
  const auto kept = filter_paraphrases(g.candidates, settings.threshold);
  std::size_t next = 0;
  for (const auto& c : g.candidates) {
    const bool keep = next < kept.size() && kept[next].text == c.text;
    if (keep) ++next;
    g.retained.push_back(keep);
  }
  g.flagged = kept.size() < 2;
  return g;
}

}  // namespace sage
