#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/linalg.hpp"
#include "dvs/random.hpp"

namespace dvs {

/// log of the normalizing constant: sum of det(A_S A_S^T) over all k-subsets,
/// which closes to C(m-n, k-n) * det(A A^T).
inline double log_partition_function(const DesignMatrix& A, int k) {
  if (k < A.n() || k > A.m()) throw std::domain_error("log_partition_function: k outside [n, m]");
  return log_binomial(A.m() - A.n(), k - A.n()) + A.gram_logdet();
}

/// A sampling instance: the matrix, the cardinality, and the cached log
/// normalizer.
class DvsProblem {
 public:
  DvsProblem(DesignMatrix A, int k) : A_(std::move(A)), k_(k) {
    logZ_ = log_partition_function(A_, k_);
  }

  const DesignMatrix& matrix() const { return A_; }
  int k() const { return k_; }
  double log_partition() const { return logZ_; }

 private:
  DesignMatrix A_;
  int k_;
  double logZ_;
};

struct UnnormalizedMarginal {
  double log_value = kNegInf;
  int rank_T = 0;  // rank of the conditioned column block
  int rank_B = 0;  // rank of the residual block outside its column span
};

/// log sum of det(M_S M_S^T) over all k-subsets S containing T, for a raw
/// rows x cols matrix M. Returns -inf when no positive-determinant superset
/// exists. Works for any row count, including matrices that are not full row
/// rank (every superset determinant is then zero).
///
/// The computation splits M by the column span of M_T: with M_T = Q Sigma V^T
/// (rank r_T) and an orthonormal completion Q_perp,
///   B = Q_perp^T M_{T^c},  C = Sigma^{-1} Q^T M_{T^c},
/// the sum equals  prod sigma_i^2(M_T) * prod sigma_j^2(B) * Gamma  with
/// Gamma the elementary symmetric polynomial of degree k - |T| - r(B) of
/// P_B (I + C^T C) P_B, where P_B projects onto the null space of B's rows.
inline UnnormalizedMarginal unnormalized_marginal(const Eigen::MatrixXd& M, int k,
                                                  std::span<const int> T,
                                                  double rank_tol_scale = kDefaultRankTolScale) {
  const int nr = static_cast<int>(M.rows());
  const int m = static_cast<int>(M.cols());
  const int t = static_cast<int>(T.size());
  if (k < 0 || k > m) throw std::domain_error("unnormalized_marginal: k outside [0, m]");
  if (t > k) throw std::domain_error("unnormalized_marginal: |T| exceeds k");
  require_valid_index_set(T, m, "unnormalized_marginal");

  UnnormalizedMarginal out;
  if (nr == 0) {
    // Empty Gram determinants are 1, so the sum just counts supersets.
    out.log_value = log_binomial(m - t, k - t);
    return out;
  }

  std::vector<int> t_mask(m, 0);
  for (int idx : T) t_mask[idx] = 1;
  Eigen::MatrixXd rest(nr, m - t);
  {
    int c = 0;
    for (int i = 0; i < m; ++i)
      if (!t_mask[i]) rest.col(c++) = M.col(i);
  }

  double log_sigma_T = 0.0;
  Eigen::MatrixXd B, C;
  if (t > 0) {
    Eigen::MatrixXd block(nr, t);
    {
      int c = 0;
      for (int i = 0; i < m; ++i)
        if (t_mask[i]) block.col(c++) = M.col(i);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeFullU);
    const Eigen::VectorXd& sv = svd.singularValues();
    out.rank_T = numerical_rank(sv, nr, t, rank_tol_scale);
    for (int i = 0; i < out.rank_T; ++i) log_sigma_T += 2.0 * std::log(sv[i]);
    const Eigen::MatrixXd Qt_rest = svd.matrixU().transpose() * rest;
    B = Qt_rest.bottomRows(nr - out.rank_T);
    C = Qt_rest.topRows(out.rank_T);
    for (int i = 0; i < out.rank_T; ++i) C.row(i) /= sv[i];
  } else {
    B = rest;
    C.resize(0, m - t);
  }

  double log_sigma_B = 0.0;
  Eigen::MatrixXd P_B = Eigen::MatrixXd::Identity(m - t, m - t);
  if (B.rows() > 0 && B.cols() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    out.rank_B =
        numerical_rank(sv, static_cast<int>(B.rows()), static_cast<int>(B.cols()), rank_tol_scale);
    for (int j = 0; j < out.rank_B; ++j) log_sigma_B += 2.0 * std::log(sv[j]);
    const auto span_B = svd.matrixV().leftCols(out.rank_B);
    P_B.noalias() -= span_B * span_B.transpose();
  }

  const int degree = k - t - out.rank_B;
  if (degree < 0) return out;
  if (out.rank_T + out.rank_B < nr) return out;  // no superset spans the rows

  double log_gamma = 0.0;
  if (degree > 0) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(m - t, m - t);
    G.noalias() += C.transpose() * C;
    G = P_B * G * P_B;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    std::vector<double> log_eigs(static_cast<std::size_t>(m - t));
    for (int i = 0; i < m - t; ++i) {
      const double lambda = es.eigenvalues()[i];
      log_eigs[static_cast<std::size_t>(i)] = lambda > 0.0 ? std::log(lambda) : kNegInf;
    }
    log_gamma = log_elem_sym_poly(log_eigs, degree);
    if (log_gamma == kNegInf) return out;
  }

  out.log_value = log_sigma_T + log_sigma_B + log_gamma;
  return out;
}

inline UnnormalizedMarginal unnormalized_marginal(const DesignMatrix& A, int k,
                                                  std::span<const int> T) {
  return unnormalized_marginal(A.matrix(), k, T, A.rank_tol_scale());
}

struct MarginalResult {
  std::vector<int> T;
  double log_unnormalized = kNegInf;
  double probability = 0.0;
  int rank_T = 0;
  int rank_B = 0;
};

/// P(T is contained in the sampled subset).
inline MarginalResult marginal(const DvsProblem& problem, std::span<const int> T) {
  const UnnormalizedMarginal u = unnormalized_marginal(problem.matrix(), problem.k(), T);
  MarginalResult result;
  result.T.assign(T.begin(), T.end());
  result.log_unnormalized = u.log_value;
  result.probability = u.log_value == kNegInf ? 0.0 : std::exp(u.log_value - problem.log_partition());
  result.rank_T = u.rank_T;
  result.rank_B = u.rank_B;
  return result;
}

/// Probability that the sequential sampler picks i next, given the ordered
/// prefix drawn so far: P(prefix+{i} contained) / ((k-|prefix|) P(prefix contained)).
inline double conditional_prob(const DvsProblem& problem, std::span<const int> prefix, int i) {
  const int k = problem.k();
  const int p = static_cast<int>(prefix.size());
  if (p >= k) throw std::domain_error("conditional_prob: prefix already has k entries");
  if (i < 0 || i >= problem.matrix().m()) throw std::domain_error("conditional_prob: index out of range");
  if (contains_index(prefix, i)) throw std::domain_error("conditional_prob: index already in prefix");
  const double den = unnormalized_marginal(problem.matrix(), k, prefix).log_value;
  if (den == kNegInf) throw NullEventError("conditional_prob: prefix has zero probability");
  std::vector<int> extended(prefix.begin(), prefix.end());
  extended.push_back(i);
  const double num = unnormalized_marginal(problem.matrix(), k, extended).log_value;
  if (num == kNegInf) return 0.0;
  return std::exp(num - den) / static_cast<double>(k - p);
}

struct OrderedSample {
  std::vector<int> tuple;
  double log_prob = 0.0;
};

/// Draws an ordered k-tuple whose underlying set follows the Gram-determinant
/// distribution exactly. Deterministic given the generator state.
inline OrderedSample sample_exact(const DvsProblem& problem, Rng& rng) {
  const DesignMatrix& A = problem.matrix();
  const int k = problem.k();
  const int m = A.m();
  OrderedSample sample;
  sample.tuple.reserve(static_cast<std::size_t>(k));
  double prev = problem.log_partition();
  std::vector<int> candidates, extended;
  std::vector<double> log_nums;
  for (int p = 0; p < k; ++p) {
    candidates.clear();
    log_nums.clear();
    for (int i = 0; i < m; ++i) {
      if (contains_index(sample.tuple, i)) continue;
      candidates.push_back(i);
      extended = sample.tuple;
      extended.push_back(i);
      log_nums.push_back(
          unnormalized_marginal(A.matrix(), k, extended, A.rank_tol_scale()).log_value);
    }
    const std::size_t pick = pick_log_weighted(rng, log_nums);
    sample.log_prob += log_nums[pick] - prev - std::log(static_cast<double>(k - p));
    prev = log_nums[pick];
    sample.tuple.push_back(candidates[pick]);
  }
  return sample;
}

}  // namespace dvs
