#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/linalg.hpp"
#include "dvs/oracle.hpp"
#include "dvs/random.hpp"

namespace dvs {

inline constexpr double kDefaultProjectionConstant = 8.0;

/// log det(A_S^T A_S + eps I), the Gram determinant of the selected columns of
/// the implicit stack [A above sqrt(eps) I].
inline double log_perturbed_det(const DesignMatrix& A, std::span<const int> S, double eps) {
  if (eps <= 0.0) throw std::domain_error("perturbed_det: eps must be positive");
  require_valid_index_set(S, A.m(), "perturbed_det");
  const Eigen::MatrixXd block = A.columns(S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block.transpose() * block);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    acc += std::log(std::max(es.eigenvalues()[i], 0.0) + eps);
  return acc;
}

inline double perturbed_det(const DesignMatrix& A, std::span<const int> S, double eps) {
  return std::exp(log_perturbed_det(A, S, eps));
}

/// (1/sqrt(d)) G X with G standard normal, or X itself when d already covers
/// the row count.
inline Eigen::MatrixXd project_gaussian(const Eigen::MatrixXd& X, int d, Rng& rng) {
  if (d < 1) throw std::domain_error("project_gaussian: d must be positive");
  if (d >= X.rows()) return X;
  Eigen::MatrixXd G(d, X.rows());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < X.rows(); ++j) G(i, j) = standard_normal(rng);
  return (G * X) / std::sqrt(static_cast<double>(d));
}

/// Exact draw of a k-subset of columns of X with probability proportional to
/// det(X_S^T X_S), by enumerating all subsets.
inline SubsetSelection volume_sample_enum(const Eigen::MatrixXd& X, int k, Rng& rng,
                                          std::uint64_t cap = kEnumerationCap) {
  const int m = static_cast<int>(X.cols());
  if (k < 1 || k > static_cast<int>(X.rows()) || k > m)
    throw std::domain_error("volume_sample_enum: need 1 <= k <= min(rows, cols)");
  if (!binomial_within_cap(m, k, cap))
    throw EnumerationLimitError(
        "volume_sample_enum: C(m,k) exceeds the enumeration cap; use the exact "
        "sequential sampler instead");
  std::vector<std::vector<int>> subsets;
  std::vector<double> log_weights;
  for_each_subset(m, k, [&](std::span<const int> S) {
    Eigen::MatrixXd block(X.rows(), k);
    for (int c = 0; c < k; ++c) block.col(c) = X.col(S[static_cast<std::size_t>(c)]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      const double s = svd.singularValues()[i];
      if (s <= 0.0) {
        acc = kNegInf;
        break;
      }
      acc += 2.0 * std::log(s);
    }
    subsets.emplace_back(S.begin(), S.end());
    log_weights.push_back(acc);
  });
  const std::size_t pick = pick_log_weighted(rng, log_weights);
  return SubsetSelection{subsets[pick], log_weights[pick]};
}

/// A draw from the projected-and-perturbed approximation, with the knobs and
/// distortion estimates used to produce it.
struct ApproxReport {
  SubsetSelection selection;
  double eps = 0.0;
  double delta2 = 0.0;
  int d_used = 0;
  bool bypassed = false;     // projection skipped because d covered the stack
  double delta1_estimate = 0.0;  // n * eps / sigma_min^2(A)
};

/// Augments A with a sqrt(eps) identity block, projects the stacked columns to
/// d = min(m + n, ceil(c k^2 ln(m) / delta2^2)) dimensions, and volume-samples
/// k columns of the result.
inline ApproxReport sample_approx(const DesignMatrix& A, int k, double eps, double delta2,
                                  Rng& rng, double c = kDefaultProjectionConstant,
                                  std::uint64_t cap = kEnumerationCap) {
  if (k < A.n() || k > A.m()) throw std::domain_error("sample_approx: k outside [n, m]");
  if (eps <= 0.0) throw std::domain_error("sample_approx: eps must be positive");
  if (delta2 <= 0.0 || delta2 > 0.5)
    throw std::domain_error("sample_approx: delta2 outside (0, 1/2]");
  const int n = A.n();
  const int m = A.m();
  ApproxReport report;
  report.eps = eps;
  report.delta2 = delta2;
  const double s_min = A.singular_values()[n - 1];
  report.delta1_estimate = n * eps / (s_min * s_min);
  const double d_target =
      std::ceil(c * k * k * std::log(static_cast<double>(m)) / (delta2 * delta2));
  report.d_used = static_cast<int>(std::min<double>(m + n, d_target));
  report.bypassed = report.d_used >= m + n;

  if (report.bypassed) {
    // Volume sampling on the stack without forming it: subset Grams are
    // perturbed determinants of A.
    if (!binomial_within_cap(m, k, cap))
      throw EnumerationLimitError(
          "sample_approx: C(m,k) exceeds the enumeration cap; use the exact "
          "sequential sampler instead");
    std::vector<std::vector<int>> subsets;
    std::vector<double> log_weights;
    for_each_subset(m, k, [&](std::span<const int> S) {
      subsets.emplace_back(S.begin(), S.end());
      log_weights.push_back(log_perturbed_det(A, S, eps));
    });
    const std::size_t pick = pick_log_weighted(rng, log_weights);
    report.selection = SubsetSelection{subsets[pick], log_weights[pick]};
    return report;
  }

  // (1/sqrt(d)) G [A; sqrt(eps) I] assembled as two blocks of G.
  const int d = report.d_used;
  Eigen::MatrixXd G(d, n + m);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n + m; ++j) G(i, j) = standard_normal(rng);
  Eigen::MatrixXd projected = G.leftCols(n) * A.matrix();
  projected.noalias() += std::sqrt(eps) * G.rightCols(m);
  projected /= std::sqrt(static_cast<double>(d));
  report.selection = volume_sample_enum(projected, k, rng, cap);
  return report;
}

}  // namespace dvs
