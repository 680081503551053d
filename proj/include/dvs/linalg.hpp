#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"

namespace dvs {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// e_j(x_1..x_N), the sum over all j-element products. e_0 = 1.
inline double elem_sym_poly(std::span<const double> values, int j) {
  const int N = static_cast<int>(values.size());
  if (j < 0 || j > N) throw std::domain_error("elem_sym_poly: order out of range");
  std::vector<double> e(static_cast<std::size_t>(j) + 1, 0.0);
  e[0] = 1.0;
  for (int i = 0; i < N; ++i)
    for (int d = std::min(j, i + 1); d >= 1; --d) e[d] += values[i] * e[d - 1];
  return e[j];
}

/// log e_j given the logs of nonnegative inputs (-inf encodes a zero input).
inline double log_elem_sym_poly(std::span<const double> log_values, int j) {
  const int N = static_cast<int>(log_values.size());
  if (j < 0 || j > N) throw std::domain_error("log_elem_sym_poly: order out of range");
  std::vector<double> e(static_cast<std::size_t>(j) + 1, kNegInf);
  e[0] = 0.0;
  auto log_add = [](double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  };
  for (int i = 0; i < N; ++i)
    for (int d = std::min(j, i + 1); d >= 1; --d)
      e[d] = log_add(e[d], log_values[i] + e[d - 1]);
  return e[j];
}

/// log det(M M^T) for a raw rows x cols block, -inf when the numerical row rank
/// falls below rows.
inline double log_det_gram(const Eigen::MatrixXd& M, double rank_tol_scale = kDefaultRankTolScale) {
  const int rows = static_cast<int>(M.rows());
  const int cols = static_cast<int>(M.cols());
  if (cols < rows) return kNegInf;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (numerical_rank(sv, rows, cols, rank_tol_scale) < rows) return kNegInf;
  double acc = 0.0;
  for (int i = 0; i < rows; ++i) acc += 2.0 * std::log(sv[i]);
  return acc;
}

/// log det(A_S A_S^T) for a column subset S of A.
inline double log_det_gram(const DesignMatrix& A, std::span<const int> S) {
  require_valid_index_set(S, A.m(), "log_det_gram");
  return log_det_gram(A.columns(S), A.rank_tol_scale());
}

/// det(M M^T); linear-domain companion of log_det_gram.
inline double det_gram(const Eigen::MatrixXd& M, double rank_tol_scale = kDefaultRankTolScale) {
  const double ld = log_det_gram(M, rank_tol_scale);
  return ld == kNegInf ? 0.0 : std::exp(ld);
}

/// det(A_S A_S^T) for a column subset S of A.
inline double det_gram(const DesignMatrix& A, std::span<const int> S) {
  const double ld = log_det_gram(A, S);
  return ld == kNegInf ? 0.0 : std::exp(ld);
}

/// Squared Frobenius norm of the pseudoinverse: sum of 1/sigma_i^2.
/// Throws when M is rank deficient under the tolerance.
inline double pinv_fro_sq(const Eigen::MatrixXd& M, double rank_tol_scale = kDefaultRankTolScale) {
  const int r_full = static_cast<int>(std::min(M.rows(), M.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (numerical_rank(sv, static_cast<int>(M.rows()), static_cast<int>(M.cols()), rank_tol_scale) <
      r_full)
    throw SingularMatrixError("pinv_fro_sq: rank deficient");
  double acc = 0.0;
  for (int i = 0; i < r_full; ++i) acc += 1.0 / (sv[i] * sv[i]);
  return acc;
}

/// Squared spectral norm of the pseudoinverse: 1/sigma_min^2.
/// Throws when M is rank deficient under the tolerance.
inline double pinv_spec_sq(const Eigen::MatrixXd& M, double rank_tol_scale = kDefaultRankTolScale) {
  const int r_full = static_cast<int>(std::min(M.rows(), M.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (numerical_rank(sv, static_cast<int>(M.rows()), static_cast<int>(M.cols()), rank_tol_scale) <
      r_full)
    throw SingularMatrixError("pinv_spec_sq: rank deficient");
  const double s_min = sv[r_full - 1];
  return 1.0 / (s_min * s_min);
}

inline double pinv_fro_sq(const DesignMatrix& A, std::span<const int> S) {
  require_valid_index_set(S, A.m(), "pinv_fro_sq");
  return pinv_fro_sq(A.columns(S), A.rank_tol_scale());
}

inline double pinv_spec_sq(const DesignMatrix& A, std::span<const int> S) {
  require_valid_index_set(S, A.m(), "pinv_spec_sq");
  return pinv_spec_sq(A.columns(S), A.rank_tol_scale());
}

inline constexpr double kDegenerateDowndateTol = 1e-12;
inline constexpr int kGramRefreshInterval = 64;

/// Running inverse of A_T A_T^T under single-column insertions and removals.
/// T must keep full row rank; a removal that would lose it is refused.
struct GramInverseState {
  std::vector<int> subset;
  Eigen::MatrixXd inverse;
  double logdet = 0.0;
  int update_count = 0;
};

namespace detail {

inline void gram_recompute(const DesignMatrix& A, GramInverseState& state) {
  Eigen::MatrixXd block = A.columns(state.subset);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (numerical_rank(sv, A.n(), static_cast<int>(state.subset.size()), A.rank_tol_scale()) < A.n())
    throw SingularMatrixError("gram inverse: subset lost full row rank");
  Eigen::VectorXd inv_sq(A.n());
  state.logdet = 0.0;
  for (int i = 0; i < A.n(); ++i) {
    state.logdet += 2.0 * std::log(sv[i]);
    inv_sq[i] = 1.0 / (sv[i] * sv[i]);
  }
  state.inverse = svd.matrixU() * inv_sq.asDiagonal() * svd.matrixU().transpose();
  state.update_count = 0;
}

inline void gram_maybe_refresh(const DesignMatrix& A, GramInverseState& state,
                               int refresh_interval) {
  if (++state.update_count >= refresh_interval) gram_recompute(A, state);
}

}  // namespace detail

/// Throws when the selected columns do not span all rows.
inline GramInverseState make_gram_inverse(const DesignMatrix& A, std::span<const int> subset) {
  require_valid_index_set(subset, A.m(), "make_gram_inverse");
  GramInverseState state;
  state.subset.assign(subset.begin(), subset.end());
  detail::gram_recompute(A, state);
  return state;
}

/// Adds column col to the tracked subset.
inline void gram_update(const DesignMatrix& A, GramInverseState& state, int col,
                        int refresh_interval = kGramRefreshInterval) {
  if (col < 0 || col >= A.m()) throw std::domain_error("gram_update: column out of range");
  if (contains_index(state.subset, col)) throw std::domain_error("gram_update: column already present");
  const Eigen::VectorXd a = A.column(col);
  const Eigen::VectorXd Ma = state.inverse * a;
  const double denom = 1.0 + a.dot(Ma);
  state.inverse -= (Ma * Ma.transpose()) / denom;
  state.logdet += std::log(denom);
  state.subset.push_back(col);
  detail::gram_maybe_refresh(A, state, refresh_interval);
}

/// Removes column col from the tracked subset. Returns false, leaving the state
/// untouched, when the removal is numerically degenerate (rank would drop).
inline bool gram_downdate(const DesignMatrix& A, GramInverseState& state, int col,
                          int refresh_interval = kGramRefreshInterval) {
  auto it = std::find(state.subset.begin(), state.subset.end(), col);
  if (it == state.subset.end()) throw std::domain_error("gram_downdate: column not present");
  const Eigen::VectorXd a = A.column(col);
  const Eigen::VectorXd Ma = state.inverse * a;
  const double denom = 1.0 - a.dot(Ma);
  if (denom <= kDegenerateDowndateTol) return false;
  state.inverse += (Ma * Ma.transpose()) / denom;
  state.logdet += std::log(denom);
  state.subset.erase(it);
  detail::gram_maybe_refresh(A, state, refresh_interval);
  return true;
}

}  // namespace dvs
