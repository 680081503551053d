#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/exact.hpp"
#include "dvs/linalg.hpp"

namespace dvs {

namespace detail {

inline Eigen::MatrixXd drop_row(const Eigen::MatrixXd& M, int row) {
  Eigen::MatrixXd out(M.rows() - 1, M.cols());
  int r = 0;
  for (int i = 0; i < M.rows(); ++i)
    if (i != row) out.row(r++) = M.row(i);
  return out;
}

}  // namespace detail

/// E[sum of squared pseudoinverse singular values of the selected columns,
/// given the prefix]. Evaluated as the ratio of marginal sums: each row-deleted
/// copy of A contributes one numerator term, the matrix itself the denominator.
/// Requires every size-k column subset to have full row rank; a rank-deficient
/// subset would carry zero probability yet still enter the numerator sums, so
/// the ratio overestimates the conditional mean on such inputs.
inline double conditional_expectation_fro(const DesignMatrix& A, int k,
                                          std::span<const int> prefix) {
  if (static_cast<int>(prefix.size()) > k)
    throw std::domain_error("conditional_expectation_fro: prefix longer than k");
  const double den =
      unnormalized_marginal(A.matrix(), k, prefix, A.rank_tol_scale()).log_value;
  if (den == kNegInf)
    throw NullEventError("conditional_expectation_fro: prefix has zero probability");
  double acc = 0.0;
  for (int j = 0; j < A.n(); ++j) {
    const double num =
        unnormalized_marginal(detail::drop_row(A.matrix(), j), k, prefix, A.rank_tol_scale())
            .log_value;
    if (num != kNegInf) acc += std::exp(num - den);
  }
  return acc;
}

/// One greedy pass of the deterministic selection.
struct DerandTrace {
  std::vector<int> chosen;
  std::vector<std::map<int, double>> per_step;  // candidate -> conditional expectation
  double final_fro_sq = 0.0;
  double bound_fro = 0.0;  // (m-n+1)/(k-n+1) times the full-matrix value
};

/// Greedily appends the candidate minimizing the conditional expectation at
/// each of k steps (ties to the lowest index). The result is guaranteed to
/// stay within bound_fro.
inline DerandTrace derandomized_select(const DesignMatrix& A, int k) {
  if (k < A.n() || k > A.m()) throw std::domain_error("derandomized_select: k outside [n, m]");
  DerandTrace trace;
  trace.bound_fro = static_cast<double>(A.m() - A.n() + 1) /
                    static_cast<double>(k - A.n() + 1) *
                    pinv_fro_sq(A.matrix(), A.rank_tol_scale());
  std::vector<int> extended;
  for (int step = 0; step < k; ++step) {
    std::map<int, double> values;
    int best = -1;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i < A.m(); ++i) {
      if (contains_index(trace.chosen, i)) continue;
      extended = trace.chosen;
      extended.push_back(i);
      double value = std::numeric_limits<double>::infinity();
      try {
        value = conditional_expectation_fro(A, k, extended);
      } catch (const NullEventError&) {
        // Dead-end candidate: no full-rank completion through it.
      }
      values.emplace(i, value);
      if (value < best_value) {
        best_value = value;
        best = i;
      }
    }
    if (best < 0) throw InfeasibleError("derandomized_select: every candidate is a dead end");
    trace.per_step.push_back(std::move(values));
    trace.chosen.push_back(best);
  }
  // Evaluate on the sorted subset so the result is independent of pick order.
  std::vector<int> sorted = trace.chosen;
  std::sort(sorted.begin(), sorted.end());
  trace.final_fro_sq = pinv_fro_sq(A, sorted);
  return trace;
}

}  // namespace dvs
