#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/exact.hpp"
#include "dvs/linalg.hpp"
#include "dvs/oracle.hpp"
#include "dvs/random.hpp"

namespace dvs {

enum class Criterion { kA, kE, kD };

/// Criterion value for a selection; lower is better for all three. Singular
/// selections carry an infinite value and the flag.
struct ObjectiveValue {
  double value = std::numeric_limits<double>::infinity();
  bool singular = true;
};

inline const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::kA: return "A";
    case Criterion::kE: return "E";
    case Criterion::kD: return "D";
  }
  return "?";
}

inline ObjectiveValue objective(const DesignMatrix& A, std::span<const int> S, Criterion c) {
  require_valid_index_set(S, A.m(), "objective");
  ObjectiveValue out;
  if (c == Criterion::kD) {
    const double ld = log_det_gram(A, S);
    if (ld == kNegInf) return out;
    return {-ld, false};
  }
  try {
    out.value = c == Criterion::kA ? pinv_fro_sq(A, S) : pinv_spec_sq(A, S);
    out.singular = false;
  } catch (const SingularMatrixError&) {
  }
  return out;
}

/// l_i = a_i^T (A A^T)^{-1} a_i; the scores sum to n.
inline Eigen::VectorXd leverage_scores(const DesignMatrix& A) {
  Eigen::VectorXd scores(A.m());
  const Eigen::MatrixXd& G = A.gram_inverse();
  for (int i = 0; i < A.m(); ++i) {
    const auto a = A.column(i);
    scores[i] = a.dot(G * a);
  }
  return scores;
}

namespace detail {

/// Sequential weighted draws without replacement; zero-weight indices are
/// never selected.
inline std::vector<int> weighted_without_replacement(std::vector<double> weights, int k,
                                                     Rng& rng, const char* where) {
  const int m = static_cast<int>(weights.size());
  if (k < 0 || k > m) throw std::domain_error(std::string(where) + ": k outside [0, m]");
  int positive = 0;
  for (const double w : weights) {
    if (w < 0.0) throw std::domain_error(std::string(where) + ": negative weight");
    if (w > 0.0) ++positive;
  }
  if (positive < k)
    throw InfeasibleError(std::string(where) + ": fewer than k indices have positive weight");
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(k));
  for (int step = 0; step < k; ++step) {
    const std::size_t i = pick_weighted(rng, weights);
    picked.push_back(static_cast<int>(i));
    weights[i] = 0.0;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace detail

inline SubsetSelection sample_leverage(const DesignMatrix& A, int k, Rng& rng) {
  const Eigen::VectorXd scores = leverage_scores(A);
  std::vector<double> weights(scores.data(), scores.data() + scores.size());
  SubsetSelection out;
  out.indices = detail::weighted_without_replacement(std::move(weights), k, rng, "sample_leverage");
  if (k >= A.n()) out.logdet = log_det_gram(A, out.indices);
  return out;
}

inline SubsetSelection sample_predictive_length(const DesignMatrix& A, int k, Rng& rng) {
  std::vector<double> weights(static_cast<std::size_t>(A.m()));
  for (int i = 0; i < A.m(); ++i) weights[static_cast<std::size_t>(i)] = A.column(i).norm();
  SubsetSelection out;
  out.indices =
      detail::weighted_without_replacement(std::move(weights), k, rng, "sample_predictive_length");
  if (k >= A.n()) out.logdet = log_det_gram(A, out.indices);
  return out;
}

inline SubsetSelection sample_uniform(int m, int k, Rng& rng) {
  if (m < 0 || k < 0 || k > m) throw std::domain_error("sample_uniform: need 0 <= k <= m");
  std::vector<int> pool(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int step = 0; step < k; ++step) {
    const std::size_t j =
        static_cast<std::size_t>(step) + uniform_below(rng, static_cast<std::uint64_t>(m - step));
    std::swap(pool[static_cast<std::size_t>(step)], pool[j]);
  }
  SubsetSelection out;
  out.indices.assign(pool.begin(), pool.begin() + k);
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

/// Result of the exchange search: local optimum, the objective after the
/// initial point and each accepted swap, and the sweep count.
struct FedorovResult {
  SubsetSelection selection;
  Criterion criterion = Criterion::kD;
  std::vector<double> objective_trace;
  int sweeps = 0;
};

namespace detail {

inline double direct_objective(const DesignMatrix& A, std::span<const int> S, Criterion c) {
  return objective(A, S, c).value;
}

}  // namespace detail

/// Greedy local search over single-column swaps: each sweep scans all
/// k(m-k) (inside, outside) pairs with rank-one Gram updates and applies the
/// best strictly improving exchange until none exists or max_sweeps is hit.
inline FedorovResult fedorov_exchange(const DesignMatrix& A, int k, Criterion criterion,
                                      const SubsetSelection& init, int max_sweeps = 50) {
  if (k < A.n() || k > A.m()) throw std::domain_error("fedorov_exchange: k outside [n, m]");
  if (static_cast<int>(init.indices.size()) != k)
    throw std::domain_error("fedorov_exchange: init size differs from k");
  require_valid_index_set(init.indices, A.m(), "fedorov_exchange");
  if (max_sweeps < 0) throw std::domain_error("fedorov_exchange: negative max_sweeps");

  FedorovResult result;
  result.criterion = criterion;
  result.selection.indices = init.indices;
  std::sort(result.selection.indices.begin(), result.selection.indices.end());
  double current = detail::direct_objective(A, result.selection.indices, criterion);
  if (std::isinf(current)) throw SingularMatrixError("fedorov_exchange: init is rank-deficient");
  result.objective_trace.push_back(current);

  GramInverseState state = make_gram_inverse(A, result.selection.indices);
  std::vector<uint8_t> inside(static_cast<std::size_t>(A.m()), 0);
  for (const int i : result.selection.indices) inside[static_cast<std::size_t>(i)] = 1;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    int best_in = -1, best_out = -1;
    double best_value = current;
    for (const int s_in : result.selection.indices) {
      GramInverseState removed = state;
      const bool clean = gram_downdate(A, removed, s_in);
      for (int s_out = 0; s_out < A.m(); ++s_out) {
        if (inside[static_cast<std::size_t>(s_out)]) continue;
        double candidate;
        if (clean) {
          GramInverseState swapped = removed;
          gram_update(A, swapped, s_out);
          switch (criterion) {
            case Criterion::kD:
              candidate = -swapped.logdet;
              break;
            case Criterion::kA:
              candidate = swapped.inverse.trace();
              break;
            case Criterion::kE: {
              Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(swapped.inverse);
              candidate = es.eigenvalues().maxCoeff();
              break;
            }
          }
        } else {
          // Degenerate downdate: evaluate the swapped subset from scratch.
          std::vector<int> swapped_set;
          swapped_set.reserve(static_cast<std::size_t>(k));
          for (const int i : result.selection.indices)
            if (i != s_in) swapped_set.push_back(i);
          swapped_set.push_back(s_out);
          std::sort(swapped_set.begin(), swapped_set.end());
          candidate = detail::direct_objective(A, swapped_set, criterion);
        }
        if (candidate < best_value) {
          best_value = candidate;
          best_in = s_in;
          best_out = s_out;
        }
      }
    }
    if (best_in < 0) break;

    auto& indices = result.selection.indices;
    indices.erase(std::find(indices.begin(), indices.end(), best_in));
    indices.insert(std::upper_bound(indices.begin(), indices.end(), best_out), best_out);
    inside[static_cast<std::size_t>(best_in)] = 0;
    inside[static_cast<std::size_t>(best_out)] = 1;

    // Accept only if the canonical evaluation agrees the swap improves.
    const double verified = detail::direct_objective(A, indices, criterion);
    if (!(verified < current)) {
      indices.erase(std::find(indices.begin(), indices.end(), best_out));
      indices.insert(std::upper_bound(indices.begin(), indices.end(), best_in), best_in);
      inside[static_cast<std::size_t>(best_in)] = 1;
      inside[static_cast<std::size_t>(best_out)] = 0;
      break;
    }
    current = verified;
    result.objective_trace.push_back(current);
    state = make_gram_inverse(A, indices);
    result.sweeps = sweep + 1;
  }
  result.selection.logdet = log_det_gram(A, result.selection.indices);
  return result;
}

/// m samples by n features with responses; the design matrix everything else
/// consumes is the transpose, columns = samples.
struct RegressionDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  bool standardized = false;
};

inline RegressionDataset make_regression_dataset(Eigen::MatrixXd X, Eigen::VectorXd y,
                                                 bool standardize = false) {
  if (X.rows() != y.size())
    throw std::domain_error("make_regression_dataset: sample count mismatch between X and y");
  if (X.rows() == 0 || X.cols() == 0)
    throw std::domain_error("make_regression_dataset: empty dataset");
  if (standardize) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double mean = X.col(j).mean();
      X.col(j).array() -= mean;
      const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(X.rows()));
      if (sd > 0.0) X.col(j) /= sd;
    }
  }
  return RegressionDataset{std::move(X), std::move(y), standardize};
}

inline DesignMatrix design_from(const RegressionDataset& data,
                                double rank_tol_scale = kDefaultRankTolScale) {
  return DesignMatrix(data.X.transpose(), rank_tol_scale);
}

/// Full-dataset prediction error of the least-squares fit on the selected
/// samples.
struct RegressionEval {
  double prediction_error = 0.0;
  bool rank_deficient = false;  // fit fell back to the minimum-norm solution
};

inline RegressionEval regression_eval(const RegressionDataset& data, std::span<const int> S,
                                      double rank_tol_scale = kDefaultRankTolScale) {
  const int m = static_cast<int>(data.X.rows());
  const int n = static_cast<int>(data.X.cols());
  require_valid_index_set(S, m, "regression_eval");
  if (S.empty()) throw std::domain_error("regression_eval: empty selection");
  Eigen::MatrixXd Xs(static_cast<Eigen::Index>(S.size()), n);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(S.size()));
  for (std::size_t r = 0; r < S.size(); ++r) {
    Xs.row(static_cast<Eigen::Index>(r)) = data.X.row(S[r]);
    ys[static_cast<Eigen::Index>(r)] = data.y[S[r]];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s_max = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  if (s_max > 0.0)
    svd.setThreshold(
        rank_threshold(s_max, static_cast<int>(Xs.rows()), static_cast<int>(Xs.cols()),
                       rank_tol_scale) /
        s_max);
  const Eigen::VectorXd alpha = svd.solve(ys);
  RegressionEval out;
  out.rank_deficient =
      numerical_rank(svd.singularValues(), static_cast<int>(Xs.rows()),
                     static_cast<int>(Xs.cols()), rank_tol_scale) < std::min<int>(n, Xs.rows()) ||
      static_cast<int>(Xs.rows()) < n;
  out.prediction_error = (data.y - data.X * alpha).norm();
  return out;
}

/// Expected inverse-norm objectives versus their closed-form ceilings:
/// (m-n+1)/(k-n+1) times the full-matrix value for the Frobenius side,
/// 1 + n(m-k)/(k-n+1) times it for the spectral side.
struct BoundReport {
  double fro_mean = 0.0;
  double fro_se = 0.0;
  double fro_bound = 0.0;
  bool fro_holds = false;
  double spec_mean = 0.0;
  double spec_se = 0.0;
  double spec_bound = 0.0;
  bool spec_holds = false;
  long samples = 0;  // 0 means exact enumeration
};

namespace detail {

inline void fill_bounds(const DvsProblem& problem, BoundReport& report) {
  const DesignMatrix& A = problem.matrix();
  const double factor = static_cast<double>(A.m() - A.n() + 1) / (problem.k() - A.n() + 1);
  report.fro_bound = factor * pinv_fro_sq(A.matrix(), A.rank_tol_scale());
  const double spec_factor =
      1.0 + static_cast<double>(A.n()) * (A.m() - problem.k()) / (problem.k() - A.n() + 1);
  report.spec_bound = spec_factor * pinv_spec_sq(A.matrix(), A.rank_tol_scale());
}

inline void fill_flags(BoundReport& report) {
  const auto leq = [](double mean, double bound) {
    return mean <= bound + 1e-8 * std::max(1.0, std::abs(bound));
  };
  report.fro_holds = leq(report.fro_mean, report.fro_bound);
  report.spec_holds = leq(report.spec_mean, report.spec_bound);
}

}  // namespace detail

/// Exact expectations by enumeration over the full subset distribution.
inline BoundReport bound_check_exact(const DvsProblem& problem,
                                     std::uint64_t cap = kEnumerationCap) {
  const auto dist = enumerate_distribution(problem.matrix(), problem.k(), cap);
  BoundReport report;
  for (const auto& [S, p] : dist.table) {
    report.fro_mean += p * pinv_fro_sq(problem.matrix(), S);
    report.spec_mean += p * pinv_spec_sq(problem.matrix(), S);
  }
  detail::fill_bounds(problem, report);
  detail::fill_flags(report);
  return report;
}

/// Monte Carlo estimate over N draws of the exact sequential sampler, with
/// standard errors (zero when N < 2).
inline BoundReport bound_check_mc(const DvsProblem& problem, long num_samples, Rng& rng) {
  if (num_samples < 1) throw std::domain_error("bound_check_mc: need at least one sample");
  BoundReport report;
  report.samples = num_samples;
  double fro_sq_acc = 0.0, spec_sq_acc = 0.0;
  for (long i = 0; i < num_samples; ++i) {
    const OrderedSample draw = sample_exact(problem, rng);
    std::vector<int> S(draw.tuple.begin(), draw.tuple.end());
    std::sort(S.begin(), S.end());
    const double f = pinv_fro_sq(problem.matrix(), S);
    const double e = pinv_spec_sq(problem.matrix(), S);
    report.fro_mean += f;
    report.spec_mean += e;
    fro_sq_acc += f * f;
    spec_sq_acc += e * e;
  }
  const double N = static_cast<double>(num_samples);
  report.fro_mean /= N;
  report.spec_mean /= N;
  if (num_samples > 1) {
    const double fro_var = std::max(0.0, (fro_sq_acc / N - report.fro_mean * report.fro_mean) *
                                             N / (N - 1.0));
    const double spec_var = std::max(0.0, (spec_sq_acc / N - report.spec_mean * report.spec_mean) *
                                              N / (N - 1.0));
    report.fro_se = std::sqrt(fro_var / N);
    report.spec_se = std::sqrt(spec_var / N);
  }
  detail::fill_bounds(problem, report);
  detail::fill_flags(report);
  return report;
}

}  // namespace dvs
