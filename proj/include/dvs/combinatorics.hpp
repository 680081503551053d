#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvs/errors.hpp"

namespace dvs {

/// An unordered selection of column indices (0-based, kept sorted ascending).
/// logdet caches log det(A_S A_S^T) for the matrix the selection came from.
struct SubsetSelection {
  std::vector<int> indices;
  std::optional<double> logdet;
};

inline double log_binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return -INFINITY;
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// C(n, k) if it stays within cap, otherwise nullopt. Used to guard
/// enumeration loops before they start.
inline std::optional<std::uint64_t> binomial_within_cap(int n, int k, std::uint64_t cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is always integral at this point
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    if (result > (UINT64_MAX / num)) return std::nullopt;
    result = result * num / static_cast<std::uint64_t>(i);
    if (result > cap) return std::nullopt;
  }
  return result;
}

/// Visits all k-subsets of {0,...,m-1} in lexicographic order.
template <typename Fn>
void for_each_subset(int m, int k, Fn&& fn) {
  if (k < 0 || k > m) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    fn(static_cast<const std::vector<int>&>(idx));
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// Validates that S holds distinct indices inside [0, m). Throws std::domain_error.
inline void require_valid_index_set(std::span<const int> S, int m, const char* where) {
  std::vector<int> sorted(S.begin(), S.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= m)
      throw std::domain_error(std::string(where) + ": column index out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw std::domain_error(std::string(where) + ": duplicate column index");
  }
}

inline bool contains_index(std::span<const int> S, int i) {
  return std::find(S.begin(), S.end(), i) != S.end();
}

}  // namespace dvs
