#pragma once

// Independent reference implementations. These deliberately take the long
// way round and share no code with the library's fast paths.

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace qcnn::testing {

using Rows = std::vector<std::vector<double>>;

/// Builds the explicitly zero-padded sentence and takes one dot product per window.
inline std::vector<double> naive_wide_convolve(const Rows& sentence, const Rows& kernel,
                                               double bias) {
  const std::size_t m = sentence.size();
  const std::size_t n = kernel.size();
  const std::size_t d = kernel.front().size();
  Rows padded(n - 1, std::vector<double>(d, 0.0));
  padded.insert(padded.end(), sentence.begin(), sentence.end());
  padded.insert(padded.end(), n - 1, std::vector<double>(d, 0.0));

  std::vector<double> out;
  for (std::size_t i = 0; i + n <= padded.size(); ++i) {
    double acc = bias;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) acc += kernel[r][c] * padded[i + r][c];
    }
    out.push_back(acc);
  }
  (void)m;
  return out;
}

/// Sort (value desc, index asc), keep k, re-sort by index.
inline std::vector<double> sort_reorder_k_max(const std::vector<double>& v, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> pairs;
  for (std::size_t i = 0; i < v.size(); ++i) pairs.emplace_back(v[i], i);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  pairs.resize(k);
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<double> out;
  for (const auto& p : pairs) out.push_back(p.first);
  return out;
}

/// Exhaustive search over all 2-subsets: the pair with the largest sum, ties
/// resolved lexicographically by index. Returned in index order.
inline std::vector<double> brute_force_2_max(const std::vector<double>& v) {
  std::size_t best_i = 0;
  std::size_t best_j = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (v[i] + v[j] > v[best_i] + v[best_j]) {
        best_i = i;
        best_j = j;
      }
    }
  }
  return {v[best_i], v[best_j]};
}

}  // namespace qcnn::testing
