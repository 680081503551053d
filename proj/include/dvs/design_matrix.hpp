#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "dvs/errors.hpp"

namespace dvs {

/// Scale for the numerical full-rank criterion:
///   sigma_min > scale * sigma_max * max(rows, cols).
inline constexpr double kDefaultRankTolScale = 1e-10;

inline double rank_threshold(double sigma_max, int rows, int cols, double scale) {
  return scale * sigma_max * static_cast<double>(std::max(rows, cols));
}

/// Number of singular values above the scaled threshold. svals need not be sorted.
inline int numerical_rank(const Eigen::VectorXd& svals, int rows, int cols, double scale) {
  double sigma_max = 0.0;
  for (Eigen::Index i = 0; i < svals.size(); ++i) sigma_max = std::max(sigma_max, svals[i]);
  if (sigma_max <= 0.0) return 0;
  const double thresh = rank_threshold(sigma_max, rows, cols, scale);
  int r = 0;
  for (Eigen::Index i = 0; i < svals.size(); ++i)
    if (svals[i] > thresh) ++r;
  return r;
}

/// The n x m matrix everything samples from (n <= m, full row rank), with its
/// singular values and full-matrix Gram inverse cached at construction.
class DesignMatrix {
 public:
  explicit DesignMatrix(Eigen::MatrixXd entries, double rank_tol_scale = kDefaultRankTolScale)
      : entries_(std::move(entries)), rank_tol_scale_(rank_tol_scale) {
    const int n = static_cast<int>(entries_.rows());
    const int m = static_cast<int>(entries_.cols());
    if (n <= 0 || m <= 0) throw std::domain_error("DesignMatrix: empty matrix");
    if (n > m) throw std::domain_error("DesignMatrix: need n <= m (short and wide)");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(entries_, Eigen::ComputeThinU);
    singular_values_ = svd.singularValues();
    if (numerical_rank(singular_values_, n, m, rank_tol_scale_) < n)
      throw SingularMatrixError("DesignMatrix: row rank below n under rank tolerance");
    gram_logdet_ = 0.0;
    Eigen::VectorXd inv_sq(n);
    for (int i = 0; i < n; ++i) {
      gram_logdet_ += 2.0 * std::log(singular_values_[i]);
      inv_sq[i] = 1.0 / (singular_values_[i] * singular_values_[i]);
    }
    gram_inverse_ = svd.matrixU() * inv_sq.asDiagonal() * svd.matrixU().transpose();
  }

  int n() const { return static_cast<int>(entries_.rows()); }
  int m() const { return static_cast<int>(entries_.cols()); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  Eigen::MatrixXd::ConstColXpr column(int i) const { return entries_.col(i); }

  /// Singular values of the full matrix, non-increasing.
  const Eigen::VectorXd& singular_values() const { return singular_values_; }
  /// (A A^T)^{-1}.
  const Eigen::MatrixXd& gram_inverse() const { return gram_inverse_; }
  /// log det(A A^T).
  double gram_logdet() const { return gram_logdet_; }
  double rank_tol_scale() const { return rank_tol_scale_; }

  /// Columns selected by S, in the order S lists them.
  Eigen::MatrixXd columns(std::span<const int> S) const {
    Eigen::MatrixXd sub(entries_.rows(), static_cast<Eigen::Index>(S.size()));
    for (std::size_t j = 0; j < S.size(); ++j)
      sub.col(static_cast<Eigen::Index>(j)) = entries_.col(S[j]);
    return sub;
  }

 private:
  Eigen::MatrixXd entries_;
  Eigen::VectorXd singular_values_;
  Eigen::MatrixXd gram_inverse_;
  double gram_logdet_ = 0.0;
  double rank_tol_scale_ = kDefaultRankTolScale;
};

}  // namespace dvs
