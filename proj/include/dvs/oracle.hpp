#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/linalg.hpp"

namespace dvs {

inline constexpr std::uint64_t kEnumerationCap = 200000;

/// Exhaustive table of P(S) over all full-rank k-subsets.
struct ExactDistribution {
  int n = 0;
  int m = 0;
  int k = 0;
  double logZ = kNegInf;
  std::map<std::vector<int>, double> table;

  double probability_of(std::span<const int> S) const {
    std::vector<int> key(S.begin(), S.end());
    std::sort(key.begin(), key.end());
    auto it = table.find(key);
    return it == table.end() ? 0.0 : it->second;
  }
};

namespace detail {

inline void require_within_cap(int m, int k, std::uint64_t cap, const char* where) {
  if (!binomial_within_cap(m, k, cap))
    throw EnumerationLimitError(std::string(where) + ": C(m,k) exceeds the enumeration cap");
}

}  // namespace detail

/// Enumerates det(A_S A_S^T) over all C(m,k) subsets. Weights below the rank
/// tolerance are excluded from the support.
inline ExactDistribution enumerate_distribution(const DesignMatrix& A, int k,
                                                std::uint64_t cap = kEnumerationCap) {
  if (k < A.n() || k > A.m()) throw std::domain_error("enumerate_distribution: k outside [n, m]");
  detail::require_within_cap(A.m(), k, cap, "enumerate_distribution");
  ExactDistribution dist;
  dist.n = A.n();
  dist.m = A.m();
  dist.k = k;
  std::vector<std::pair<std::vector<int>, double>> logw;
  double log_max = kNegInf;
  for_each_subset(A.m(), k, [&](std::span<const int> S) {
    const double ld = log_det_gram(A, S);
    if (ld == kNegInf) return;
    logw.emplace_back(std::vector<int>(S.begin(), S.end()), ld);
    log_max = std::max(log_max, ld);
  });
  if (logw.empty()) throw SingularMatrixError("enumerate_distribution: empty support");
  double sum = 0.0;
  for (const auto& [S, ld] : logw) sum += std::exp(ld - log_max);
  dist.logZ = log_max + std::log(sum);
  for (const auto& [S, ld] : logw) dist.table.emplace(S, std::exp(ld - dist.logZ));
  return dist;
}

/// Half the L1 distance between a normalized frequency table and the exact
/// distribution, over the union of supports.
inline double tv_distance(const std::map<std::vector<int>, double>& empirical,
                          const ExactDistribution& exact) {
  double total = 0.0;
  for (const auto& [S, c] : empirical) total += c;
  double acc = 0.0;
  for (const auto& [S, c] : empirical) {
    const double p = total > 0.0 ? c / total : 0.0;
    acc += std::abs(p - exact.probability_of(S));
  }
  for (const auto& [S, q] : exact.table)
    if (!empirical.count(S)) acc += q;
  return 0.5 * acc;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double threshold = 0.0;
  bool pass = false;
  bool conclusive = false;
};

/// Pearson goodness-of-fit with the usual merge of cells whose expected count
/// falls below 5. Counts observed outside the exact support fail outright.
inline ChiSquareResult chi_square_gof(const std::map<std::vector<int>, double>& counts,
                                      const ExactDistribution& exact, double alpha = 0.01) {
  ChiSquareResult result;
  double total = 0.0;
  for (const auto& [S, c] : counts) {
    if (exact.probability_of(S) == 0.0 && c > 0.0) {
      result.statistic = std::numeric_limits<double>::infinity();
      result.conclusive = true;
      return result;
    }
    total += c;
  }
  if (total <= 0.0) return result;

  std::vector<std::pair<double, double>> cells;  // (expected, observed)
  for (const auto& [S, p] : exact.table) {
    auto it = counts.find(S);
    cells.emplace_back(p * total, it == counts.end() ? 0.0 : it->second);
  }
  std::sort(cells.begin(), cells.end());
  std::vector<std::pair<double, double>> merged;
  double pool_e = 0.0, pool_o = 0.0;
  for (const auto& [e, o] : cells) {
    if (pool_e < 5.0) {
      pool_e += e;
      pool_o += o;
      continue;
    }
    merged.emplace_back(e, o);
  }
  if (pool_e > 0.0) {
    if (pool_e < 5.0 && !merged.empty()) {
      merged.front().first += pool_e;
      merged.front().second += pool_o;
    } else {
      merged.emplace_back(pool_e, pool_o);
    }
  }
  result.dof = static_cast<int>(merged.size()) - 1;
  if (result.dof < 1) return result;
  for (const auto& [e, o] : merged) result.statistic += (o - e) * (o - e) / e;
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(result.dof));
  result.threshold = boost::math::quantile(dist, 1.0 - alpha);
  result.pass = result.statistic <= result.threshold;
  result.conclusive = true;
  return result;
}

struct PairCorrelation {
  int i = 0;
  int j = 0;
  double p_both = 0.0;
  double p_i = 0.0;
  double p_j = 0.0;
};

struct NegativeCorrelationReport {
  std::vector<PairCorrelation> pairs;
  double worst_excess = kNegInf;  // max over pairs of p_both - p_i * p_j
  bool all_hold = false;
};

/// Checks P(i in S and j in S) <= P(i in S) P(j in S) for every pair, from the
/// enumerated table.
inline NegativeCorrelationReport negative_correlation_check(const DesignMatrix& A, int k,
                                                            double tol = 1e-10) {
  const ExactDistribution dist = enumerate_distribution(A, k);
  const int m = A.m();
  std::vector<double> single(m, 0.0);
  std::vector<std::vector<double>> both(m, std::vector<double>(m, 0.0));
  for (const auto& [S, p] : dist.table) {
    for (std::size_t a = 0; a < S.size(); ++a) {
      single[S[a]] += p;
      for (std::size_t b = a + 1; b < S.size(); ++b) {
        both[S[a]][S[b]] += p;
        both[S[b]][S[a]] += p;
      }
    }
  }
  NegativeCorrelationReport report;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      report.pairs.push_back({i, j, both[i][j], single[i], single[j]});
      report.worst_excess = std::max(report.worst_excess, both[i][j] - single[i] * single[j]);
    }
  report.all_hold = report.worst_excess <= tol;
  return report;
}

/// det(A_S A_S^T) = e_n(eigenvalues of A_S^T A_S) within rel_tol.
inline bool en_identity_check(const DesignMatrix& A, std::span<const int> S, double rel_tol = 1e-9) {
  require_valid_index_set(S, A.m(), "en_identity_check");
  if (static_cast<int>(S.size()) < A.n()) throw std::domain_error("en_identity_check: |S| < n");
  const Eigen::MatrixXd block = A.columns(S);
  const Eigen::MatrixXd L = block.transpose() * block;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  std::vector<double> eig(es.eigenvalues().data(), es.eigenvalues().data() + L.rows());
  for (double& v : eig) v = std::max(v, 0.0);
  const double lhs = det_gram(A, S);
  const double rhs = elem_sym_poly(eig, A.n());
  return std::abs(lhs - rhs) <= rel_tol * std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

}  // namespace dvs
