// Fits least squares on a small budget of samples chosen by the swap chain
// and compares the prediction error against uniformly chosen samples. Rows
// carry uneven scales, so subsets differ sharply in how much they pin down
// the coefficients.
#include <cmath>
#include <cstdio>

#include "dvs/dvs.hpp"

int main() {
  dvs::Rng rng(21);
  const int samples = 200, features = 5, budget = 12;

  Eigen::MatrixXd X(samples, features);
  for (int i = 0; i < samples; ++i) {
    const double scale = std::exp(dvs::standard_normal(rng));
    for (int j = 0; j < features; ++j) X(i, j) = scale * dvs::standard_normal(rng);
  }
  Eigen::VectorXd coef(features);
  for (int j = 0; j < features; ++j) coef[j] = dvs::standard_normal(rng);
  Eigen::VectorXd y = X * coef;
  for (int i = 0; i < samples; ++i) y[i] += 0.1 * dvs::standard_normal(rng);

  const auto data = dvs::make_regression_dataset(X, y);
  const dvs::DesignMatrix A = dvs::design_from(data);
  const dvs::DvsProblem problem(A, budget);

  std::printf("%d samples, %d features, fitting on %d rows\n", samples, features, budget);
  std::printf("   %-10s %-10s\n", "volume", "uniform");
  for (int trial = 0; trial < 5; ++trial) {
    dvs::ChainConfig config;
    config.k = budget;
    config.steps = 2000;
    config.seed = 100 + static_cast<std::uint64_t>(trial);
    const auto chain = dvs::sample_mcmc(problem, config);
    const double volume_err =
        dvs::regression_eval(data, chain.selection.indices).prediction_error;

    dvs::Rng unif_rng(200 + static_cast<std::uint64_t>(trial));
    const auto unif = dvs::sample_uniform(samples, budget, unif_rng);
    const double uniform_err = dvs::regression_eval(data, unif.indices).prediction_error;
    std::printf("   %-10.4f %-10.4f\n", volume_err, uniform_err);
  }
  return 0;
}
