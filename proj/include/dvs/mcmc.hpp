#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dvs/combinatorics.hpp"
#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/exact.hpp"
#include "dvs/linalg.hpp"
#include "dvs/random.hpp"

namespace dvs {

inline constexpr int kDSquaredRetryCap = 32;
inline constexpr int kLogdetTraceStride = 100;

/// Builds S one column at a time, each pick maximizing the determinant of the
/// running Gram plus eps times the identity. eps <= 0 selects the default
/// 1e-3 * sigma_n^2(A).
inline SubsetSelection greedy_init(const DesignMatrix& A, int k, double eps = 0.0) {
  if (k < A.n() || k > A.m()) throw std::domain_error("greedy_init: k outside [n, m]");
  if (eps <= 0.0) {
    const double s_min = A.singular_values()[A.n() - 1];
    eps = 1e-3 * s_min * s_min;
  }
  const int n = A.n();
  Eigen::MatrixXd inverse = Eigen::MatrixXd::Identity(n, n) / eps;
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_gain = -1.0;
    for (int i = 0; i < A.m(); ++i) {
      if (contains_index(chosen, i)) continue;
      const double gain = A.column(i).dot(inverse * A.column(i));
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    const Eigen::VectorXd Ma = inverse * A.column(best);
    inverse.noalias() -= (Ma * Ma.transpose()) / (1.0 + best_gain);
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  SubsetSelection selection;
  selection.indices = std::move(chosen);
  selection.logdet = log_det_gram(A, selection.indices);
  if (selection.logdet == kNegInf)
    throw SingularMatrixError("greedy_init: selected subset lost full row rank");
  return selection;
}

/// One sequence of squared-residual-weighted picks, in pick order: the first
/// column is drawn with weight proportional to its squared norm, later ones
/// proportional to the squared distance from the span of those already picked.
/// When every remaining column sits in the chosen span, the draw degrades to
/// uniform over the remainder.
inline std::vector<int> d_squared_pick_sequence(const DesignMatrix& A, int k, Rng& rng) {
  if (k < 0 || k > A.m()) throw std::domain_error("d_squared_pick_sequence: k outside [0, m]");
  const int m = A.m();
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  Eigen::MatrixXd basis(A.n(), 0);
  std::vector<double> weights(static_cast<std::size_t>(m));
  for (int step = 0; step < k; ++step) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      if (contains_index(chosen, i)) {
        weights[static_cast<std::size_t>(i)] = 0.0;
        continue;
      }
      Eigen::VectorXd residual = A.column(i);
      residual.noalias() -= basis * (basis.transpose() * A.column(i));
      weights[static_cast<std::size_t>(i)] = residual.squaredNorm();
      total += weights[static_cast<std::size_t>(i)];
    }
    if (total <= 0.0) {
      for (int i = 0; i < m; ++i)
        weights[static_cast<std::size_t>(i)] = contains_index(chosen, i) ? 0.0 : 1.0;
    }
    const int pick = static_cast<int>(pick_weighted(rng, weights));
    Eigen::VectorXd residual = A.column(pick);
    residual.noalias() -= basis * (basis.transpose() * A.column(pick));
    const double norm = residual.norm();
    if (norm > 1e-12 * (1.0 + A.column(pick).norm())) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = residual / norm;
    }
    chosen.push_back(pick);
  }
  return chosen;
}

/// Random initialization from d_squared_pick_sequence, retried while the
/// result is rank deficient, then handed to greedy_init.
inline SubsetSelection d_squared_init(const DesignMatrix& A, int k, Rng& rng) {
  if (k < A.n() || k > A.m()) throw std::domain_error("d_squared_init: k outside [n, m]");
  for (int attempt = 0; attempt < kDSquaredRetryCap; ++attempt) {
    std::vector<int> chosen = d_squared_pick_sequence(A, k, rng);
    std::sort(chosen.begin(), chosen.end());
    const double logdet = log_det_gram(A, chosen);
    if (logdet != kNegInf) return SubsetSelection{std::move(chosen), logdet};
  }
  return greedy_init(A, k);
}

enum class ChainInit { kGreedy, kDSquared, kUser };

struct ChainConfig {
  int k = 0;
  std::optional<long> steps;  // absent: derived from the mixing budget
  double eps_tv = 0.05;
  double beta = 1.0;
  std::uint64_t seed = 0;
  ChainInit init = ChainInit::kGreedy;
  std::vector<int> user_init;
  int refresh_interval = kGramRefreshInterval;
  double greedy_eps = 0.0;  // <= 0: default 1e-3 * sigma_n^2(A)
};

/// Swap-chain state: the subset, its membership mask, and the maintained
/// Gram inverse.
struct ChainState {
  GramInverseState gram;
  SubsetSelection current;
  std::vector<std::uint8_t> in_subset;
  long step = 0;
  long accept_count = 0;
};

inline ChainState make_chain_state(const DesignMatrix& A, std::span<const int> subset) {
  require_valid_index_set(subset, A.m(), "make_chain_state");
  ChainState state;
  state.gram = make_gram_inverse(A, subset);
  state.current.indices.assign(subset.begin(), subset.end());
  std::sort(state.current.indices.begin(), state.current.indices.end());
  state.current.logdet = state.gram.logdet;
  state.in_subset.assign(static_cast<std::size_t>(A.m()), 0);
  for (int i : state.current.indices) state.in_subset[static_cast<std::size_t>(i)] = 1;
  return state;
}

namespace detail {

/// log of det(A_{S - s_in + s_out} Gram) minus log of det(A_S Gram), by
/// rank-one downdate where possible and direct evaluation where not.
/// Leaves the state's subset unchanged.
inline double swap_log_ratio(const DesignMatrix& A, ChainState& state, int s_in, int s_out,
                             int refresh_interval) {
  if (gram_downdate(A, state.gram, s_in, refresh_interval)) {
    const Eigen::VectorXd M_out = state.gram.inverse * A.column(s_out);
    const Eigen::VectorXd M_in = state.gram.inverse * A.column(s_in);
    const double gain_out = 1.0 + A.column(s_out).dot(M_out);
    const double gain_in = 1.0 + A.column(s_in).dot(M_in);
    gram_update(A, state.gram, s_in, refresh_interval);
    if (gain_out <= 0.0) return kNegInf;
    return std::log(gain_out) - std::log(gain_in);
  }
  // Removing s_in alone loses full row rank; evaluate the swapped set whole.
  std::vector<int> swapped = state.current.indices;
  std::replace(swapped.begin(), swapped.end(), s_in, s_out);
  std::sort(swapped.begin(), swapped.end());
  const double cand = log_det_gram(A, swapped);
  if (cand == kNegInf) return kNegInf;
  return cand - state.gram.logdet;
}

}  // namespace detail

/// det ratio of the swapped subset to the current one; the acceptance
/// probability at temperature beta is min(1, ratio^(1/beta)).
inline double acceptance_ratio(const DesignMatrix& A, const ChainState& state, int s_in,
                               int s_out) {
  if (!state.in_subset[static_cast<std::size_t>(s_in)])
    throw std::domain_error("acceptance_ratio: s_in not selected");
  if (state.in_subset[static_cast<std::size_t>(s_out)])
    throw std::domain_error("acceptance_ratio: s_out already selected");
  ChainState scratch = state;
  const double log_ratio =
      detail::swap_log_ratio(A, scratch, s_in, s_out, kGramRefreshInterval);
  return log_ratio == kNegInf ? 0.0 : std::exp(log_ratio);
}

/// One lazy step: a coin decides whether to propose at all; a proposed swap
/// (s_in uniform in S, s_out uniform outside) is accepted with probability
/// min(1, ratio^(1/beta)).
inline void chain_step(const DesignMatrix& A, ChainState& state, Rng& rng, double beta = 1.0,
                       int refresh_interval = kGramRefreshInterval) {
  ++state.step;
  if (uniform_bit(rng) == 0) return;
  const int k = static_cast<int>(state.current.indices.size());
  const int m = A.m();
  const int s_in = state.current.indices[static_cast<std::size_t>(uniform_below(
      rng, static_cast<std::uint64_t>(k)))];
  std::uint64_t pos = uniform_below(rng, static_cast<std::uint64_t>(m - k));
  int s_out = -1;
  for (int i = 0; i < m; ++i) {
    if (state.in_subset[static_cast<std::size_t>(i)]) continue;
    if (pos-- == 0) {
      s_out = i;
      break;
    }
  }
  const double log_ratio = detail::swap_log_ratio(A, state, s_in, s_out, refresh_interval);
  bool accept = false;
  if (log_ratio >= 0.0) {
    accept = true;
  } else if (log_ratio != kNegInf) {
    accept = std::log(uniform_unit(rng)) < log_ratio / beta;
  }
  if (!accept) return;
  if (!gram_downdate(A, state.gram, s_in, refresh_interval)) {
    std::vector<int> swapped = state.current.indices;
    std::replace(swapped.begin(), swapped.end(), s_in, s_out);
    state.gram = make_gram_inverse(A, swapped);
  } else {
    gram_update(A, state.gram, s_out, refresh_interval);
  }
  auto& indices = state.current.indices;
  indices.erase(std::find(indices.begin(), indices.end(), s_in));
  indices.insert(std::upper_bound(indices.begin(), indices.end(), s_out), s_out);
  state.current.logdet = state.gram.logdet;
  state.in_subset[static_cast<std::size_t>(s_in)] = 0;
  state.in_subset[static_cast<std::size_t>(s_out)] = 1;
  ++state.accept_count;
}

/// Steps sufficient to bring the chain within eps_tv total variation of the
/// determinant distribution, from start S0: ceil(2k(m-k)(log 1/P(S0) + log 1/eps_tv)).
inline long mixing_budget(const DvsProblem& problem, const SubsetSelection& S0,
                          double eps_tv) {
  if (eps_tv <= 0.0 || eps_tv >= 1.0) throw std::domain_error("mixing_budget: eps_tv outside (0, 1)");
  if (!S0.logdet.has_value() || *S0.logdet == kNegInf)
    throw std::domain_error("mixing_budget: start subset has zero probability");
  const int k = static_cast<int>(S0.indices.size());
  const int m = problem.matrix().m();
  const double log_inv_p = problem.log_partition() - *S0.logdet;
  const double raw = 2.0 * k * (m - k) * (log_inv_p + std::log(1.0 / eps_tv));
  return static_cast<long>(std::ceil(std::max(0.0, raw)));
}

struct McmcDiagnostics {
  std::vector<int> init;
  long steps = 0;
  long accepted = 0;
  double acceptance_rate = 0.0;
  double final_logdet = kNegInf;
  std::vector<double> logdet_trace;  // sampled every kLogdetTraceStride steps
};

struct McmcResult {
  SubsetSelection selection;
  McmcDiagnostics diagnostics;
};

/// Initializes per config, runs the configured number of steps (or the mixing
/// budget at eps_tv when steps is absent), and returns the final subset.
inline McmcResult sample_mcmc(const DvsProblem& problem, const ChainConfig& config, Rng& rng) {
  const DesignMatrix& A = problem.matrix();
  if (config.k != problem.k()) throw std::domain_error("sample_mcmc: config.k disagrees with problem");
  if (config.beta <= 0.0) throw std::domain_error("sample_mcmc: beta must be positive");
  SubsetSelection init;
  switch (config.init) {
    case ChainInit::kGreedy:
      init = greedy_init(A, config.k, config.greedy_eps);
      break;
    case ChainInit::kDSquared:
      init = d_squared_init(A, config.k, rng);
      break;
    case ChainInit::kUser: {
      if (static_cast<int>(config.user_init.size()) != config.k)
        throw std::domain_error("sample_mcmc: user init size differs from k");
      require_valid_index_set(config.user_init, A.m(), "sample_mcmc");
      init.indices = config.user_init;
      std::sort(init.indices.begin(), init.indices.end());
      init.logdet = log_det_gram(A, init.indices);
      if (init.logdet == kNegInf)
        throw SingularMatrixError("sample_mcmc: user init has zero determinant");
      break;
    }
  }
  const long steps = config.steps ? *config.steps : mixing_budget(problem, init, config.eps_tv);
  if (steps < 0) throw std::domain_error("sample_mcmc: negative step count");

  ChainState state = make_chain_state(A, init.indices);
  McmcResult result;
  result.diagnostics.init = init.indices;
  result.diagnostics.steps = steps;
  for (long s = 0; s < steps; ++s) {
    if (s % kLogdetTraceStride == 0) result.diagnostics.logdet_trace.push_back(state.gram.logdet);
    chain_step(A, state, rng, config.beta, config.refresh_interval);
  }
  result.diagnostics.accepted = state.accept_count;
  result.diagnostics.acceptance_rate =
      steps > 0 ? static_cast<double>(state.accept_count) / static_cast<double>(steps) : 0.0;
  result.diagnostics.final_logdet = state.gram.logdet;
  result.selection = state.current;
  return result;
}

inline McmcResult sample_mcmc(const DvsProblem& problem, const ChainConfig& config) {
  Rng rng(config.seed);
  return sample_mcmc(problem, config, rng);
}

}  // namespace dvs
