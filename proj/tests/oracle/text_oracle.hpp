// SPDX-License-Identifier: Apache-2.0
#pragma once

// Straight-line reference implementations of the lexical metrics over
// pre-split tokens. Quadratic n-gram matching, no maps.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oracle {

using Toks = std::vector<std::string>;

inline std::vector<Toks> grams(const Toks& t, std::size_t n) {
  std::vector<Toks> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
  return out;
}

inline double bleu(const Toks& c, const Toks& r) {
  long double log_sum = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto cg = grams(c, n), rg = grams(r, n);
    std::vector<bool> used(rg.size(), false);
    std::size_t match = 0;
    for (const auto& g : cg) {
      for (std::size_t k = 0; k < rg.size(); ++k) {
        if (!used[k] && rg[k] == g) {
          used[k] = true;
          ++match;
          break;
        }
      }
    }
    long double p;
    if (n == 1) {
      if (match == 0) return 0.0;
      p = static_cast<long double>(match) / cg.size();
    } else if (match == 0) {
      p = 1.0L / (cg.size() + 1);
    } else {
      p = static_cast<long double>(match) / cg.size();
    }
    log_sum += std::log(p);
  }
  const long double bp = c.size() < r.size() ? std::exp(1.0L - static_cast<long double>(r.size()) / c.size()) : 1.0L;
  return static_cast<double>(bp * std::exp(log_sum / 4));
}

inline double rouge_l(const Toks& c, const Toks& r) {
  std::vector<std::vector<std::size_t>> d(c.size() + 1, std::vector<std::size_t>(r.size() + 1, 0));
  for (std::size_t i = 1; i <= c.size(); ++i)
    for (std::size_t j = 1; j <= r.size(); ++j)
      d[i][j] = c[i - 1] == r[j - 1] ? d[i - 1][j - 1] + 1 : std::max(d[i - 1][j], d[i][j - 1]);
  const double l = static_cast<double>(d[c.size()][r.size()]);
  if (l == 0) return 0.0;
  const double p = l / c.size(), q = l / r.size();
  return 2 * p * q / (p + q);
}

}  // namespace oracle
