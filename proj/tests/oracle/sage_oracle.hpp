// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference for the graph entropy score. Written from the
// definition with long double accumulation and no shared code with the
// library beyond the input type.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline long double cosine(const Vec& a, const Vec& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<long double>(a[k]) * b[k];
    na += static_cast<long double>(a[k]) * a[k];
    nb += static_cast<long double>(b[k]) * b[k];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Score from an explicit similarity matrix (clamping applied here).
inline double sage_from_matrix(const std::vector<std::vector<long double>>& s_in) {
  const std::size_t n = s_in.size();
  std::vector<std::vector<long double>> s = s_in;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i][j] = i == j ? 1.0L : std::clamp(s[i][j], 0.0L, 1.0L);

  std::vector<long double> f(n, 0.0L);
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) f[i] += s[i][j];
    total += f[i];
  }
  long double h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double p = f[i] / total;
    if (p > 0) h -= p * std::log(p);
  }
  long double off = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) off += s[i][j];
  const long double lambda = 1.0L - off / static_cast<long double>(n * (n - 1));
  const long double raw = 1.0L - lambda * h / std::log(static_cast<long double>(n));
  return static_cast<double>(std::clamp(raw, 0.0L, 1.0L));
}

inline double sage(const std::vector<Vec>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::vector<long double>> s(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i][j] = cosine(xs[i], xs[j]);
  return sage_from_matrix(s);
}

/// Unit vectors with pairwise cosine exactly s (up to rounding): a shared
/// direction plus an orthogonal private direction per vector.
inline std::vector<Vec> equicorrelated(std::size_t n, double s) {
  std::vector<Vec> out(n, Vec(n + 1, 0.0));
  const double a = std::sqrt(s), b = std::sqrt(1.0 - s);
  for (std::size_t i = 0; i < n; ++i) {
    out[i][0] = a;
    out[i][i + 1] = b;
  }
  return out;
}

}  // namespace oracle
