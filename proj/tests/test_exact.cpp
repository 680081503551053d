#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "dvs/exact.hpp"
#include "dvs/oracle.hpp"
#include "test_helpers.hpp"

using dvs_test::brute_force_log_marginal;
using dvs_test::random_matrix;
using dvs_test::random_matrix_with_duplicates;
using dvs_test::star_matrix;

TEST_CASE("log_partition_function closed form") {
  dvs::DesignMatrix I2(Eigen::MatrixXd::Identity(2, 2));
  CHECK(dvs::log_partition_function(I2, 2) == Catch::Approx(0.0).margin(1e-12));

  dvs::DesignMatrix A(star_matrix());
  CHECK(dvs::log_partition_function(A, 2) == Catch::Approx(std::log(6.0)));
  CHECK(dvs::log_partition_function(A, 3) == Catch::Approx(std::log(6.0)));
  CHECK_THROWS_AS(dvs::log_partition_function(A, 1), std::domain_error);
  CHECK_THROWS_AS(dvs::log_partition_function(A, 4), std::domain_error);
}

TEST_CASE("partition value equals the perturbation limit of the cross-Gram polynomial") {
  dvs::Rng rng(5);
  dvs::DesignMatrix A(random_matrix(rng, 2, 6));
  const int n = 2, m = 6, k = 4;
  const double Z = std::exp(dvs::log_partition_function(A, k));
  auto perturbed = [&](double eps) {
    Eigen::MatrixXd L = A.matrix().transpose() * A.matrix();
    L.diagonal().array() += eps;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    std::vector<double> eig(es.eigenvalues().data(), es.eigenvalues().data() + m);
    return std::pow(eps, n - k) * dvs::elem_sym_poly(eig, k);
  };
  const double err4 = std::abs(perturbed(1e-4) - Z) / Z;
  const double err6 = std::abs(perturbed(1e-6) - Z) / Z;
  CHECK(err4 < 1e-2);
  CHECK(err6 < err4 / 10.0);
}

TEST_CASE("unnormalized_marginal on the reference instance") {
  dvs::DesignMatrix A(star_matrix());
  CHECK(dvs::unnormalized_marginal(A, 2, std::vector<int>{}).log_value ==
        Catch::Approx(std::log(6.0)));
  CHECK(dvs::unnormalized_marginal(A, 2, std::vector<int>{2}).log_value ==
        Catch::Approx(std::log(5.0)));
  CHECK(dvs::unnormalized_marginal(A, 2, std::vector<int>{0, 1}).log_value ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(dvs::unnormalized_marginal(A, 2, std::vector<int>{0, 1, 2}), std::domain_error);
}

TEST_CASE("unnormalized_marginal matches brute force everywhere") {
  dvs::Rng rng(17);

  auto check_all = [&](const dvs::DesignMatrix& A, int k, int max_t) {
    for (int t = 0; t <= std::min(max_t, k); ++t) {
      dvs::for_each_subset(A.m(), t, [&](std::span<const int> T) {
        const double expected = brute_force_log_marginal(A, k, T);
        const auto got = dvs::unnormalized_marginal(A, k, T);
        if (expected == dvs::kNegInf) {
          CHECK(got.log_value == dvs::kNegInf);
        } else {
          CHECK(got.log_value == Catch::Approx(expected).epsilon(1e-6));
        }
      });
    }
  };

  SECTION("generic instances") {
    dvs::DesignMatrix A(random_matrix(rng, 2, 6));
    for (int k = 2; k <= 5; ++k) check_all(A, k, 3);
    dvs::DesignMatrix B(random_matrix(rng, 3, 7));
    for (int k = 3; k <= 5; ++k) check_all(B, k, 3);
  }

  SECTION("duplicated columns make conditioned blocks rank deficient") {
    dvs::DesignMatrix A(random_matrix_with_duplicates(rng, 2, 6, 2));
    for (int k = 2; k <= 4; ++k) check_all(A, k, 3);
    dvs::DesignMatrix B(random_matrix_with_duplicates(rng, 3, 7, 3));
    for (int k = 3; k <= 5; ++k) check_all(B, k, 3);
  }
}

TEST_CASE("marginal probabilities on the reference instance") {
  dvs::DvsProblem problem(dvs::DesignMatrix(star_matrix()), 2);
  CHECK(dvs::marginal(problem, std::vector<int>{2}).probability == Catch::Approx(5.0 / 6.0));
  CHECK(dvs::marginal(problem, std::vector<int>{1}).probability == Catch::Approx(1.0 / 3.0));
  CHECK(dvs::marginal(problem, std::vector<int>{}).probability == Catch::Approx(1.0));
}

TEST_CASE("singleton marginals sum to k and containment is monotone") {
  dvs::Rng rng(29);
  for (int trial = 0; trial < 4; ++trial) {
    dvs::DesignMatrix A(random_matrix(rng, 3, 8));
    const int k = 3 + static_cast<int>(dvs::uniform_below(rng, 5));
    dvs::DvsProblem problem(std::move(A), k);
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) sum += dvs::marginal(problem, std::vector<int>{i}).probability;
    CHECK(sum == Catch::Approx(static_cast<double>(k)).epsilon(1e-8));

    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        if (i == j) continue;
        const double single = dvs::marginal(problem, std::vector<int>{i}).probability;
        const double pair = dvs::marginal(problem, std::vector<int>{i, j}).probability;
        CHECK(pair <= single + 1e-10);
      }
  }
}

TEST_CASE("conditional_prob transition values") {
  dvs::DvsProblem problem(dvs::DesignMatrix(star_matrix()), 2);
  CHECK(dvs::conditional_prob(problem, std::vector<int>{}, 2) == Catch::Approx(5.0 / 12.0));
  CHECK(dvs::conditional_prob(problem, std::vector<int>{}, 1) == Catch::Approx(1.0 / 6.0));
  CHECK(dvs::conditional_prob(problem, std::vector<int>{2}, 0) == Catch::Approx(4.0 / 5.0));
  CHECK_THROWS_AS(dvs::conditional_prob(problem, std::vector<int>{0, 2}, 1), std::domain_error);
  CHECK_THROWS_AS(dvs::conditional_prob(problem, std::vector<int>{0}, 0), std::domain_error);
  CHECK_THROWS_AS(dvs::conditional_prob(problem, std::vector<int>{0}, 5), std::domain_error);
}

TEST_CASE("conditional_prob sums to one over remaining candidates") {
  dvs::Rng rng(41);
  dvs::DvsProblem problem(dvs::DesignMatrix(random_matrix(rng, 3, 7)), 5);
  const std::vector<std::vector<int>> prefixes{{}, {4}, {2, 6}, {0, 1, 3}};
  for (const auto& prefix : prefixes) {
    double sum = 0.0;
    for (int i = 0; i < 7; ++i)
      if (!dvs::contains_index(prefix, i)) sum += dvs::conditional_prob(problem, prefix, i);
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("conditioning on an impossible prefix raises a null-event error") {
  // Columns 0 and 1 are parallel, so no 3-subset through both spans the rows.
  Eigen::MatrixXd M(3, 4);
  M << 1, 2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  dvs::DvsProblem problem(dvs::DesignMatrix(M), 3);
  CHECK(dvs::marginal(problem, std::vector<int>{0, 1}).probability == 0.0);
  CHECK_THROWS_AS(dvs::conditional_prob(problem, std::vector<int>{0, 1}, 2), dvs::NullEventError);
  // One step earlier the candidate that creates the dead end just gets weight 0.
  CHECK(dvs::conditional_prob(problem, std::vector<int>{0}, 1) == 0.0);
}

TEST_CASE("sample_exact degenerate cases") {
  dvs::Rng rng(3);
  dvs::DvsProblem forced(dvs::DesignMatrix(star_matrix()), 3);
  const auto sample = dvs::sample_exact(forced, rng);
  CHECK(dvs_test::sorted_copy(sample.tuple) == std::vector<int>{0, 1, 2});

  dvs::DvsProblem identity(dvs::DesignMatrix(Eigen::MatrixXd::Identity(2, 2)), 2);
  const auto pair = dvs::sample_exact(identity, rng);
  CHECK(dvs_test::sorted_copy(pair.tuple) == std::vector<int>{0, 1});
}

TEST_CASE("sample_exact tuple probability matches the set law") {
  dvs::Rng rng(13);
  dvs::DvsProblem problem(dvs::DesignMatrix(star_matrix()), 2);
  const auto dist = dvs::enumerate_distribution(problem.matrix(), 2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto sample = dvs::sample_exact(problem, rng);
    const double set_prob = dist.probability_of(sample.tuple);
    CHECK(2.0 * std::exp(sample.log_prob) == Catch::Approx(set_prob).epsilon(1e-9));
  }
}

TEST_CASE("sample_exact frequencies match enumeration on the reference instance") {
  dvs::Rng rng(7);
  dvs::DvsProblem problem(dvs::DesignMatrix(star_matrix()), 2);
  const auto dist = dvs::enumerate_distribution(problem.matrix(), 2);
  dvs_test::CountTable counts;
  const int N = 60000;
  for (int i = 0; i < N; ++i) dvs_test::tally(counts, dvs::sample_exact(problem, rng).tuple);
  CHECK(dvs::tv_distance(counts, dist) < 0.02);
}

TEST_CASE("sample_exact passes goodness of fit on a wider instance") {
  dvs::Rng rng(19);
  dvs::DvsProblem problem(dvs::DesignMatrix(random_matrix(rng, 2, 5)), 3);
  const auto dist = dvs::enumerate_distribution(problem.matrix(), 3);
  dvs_test::CountTable counts;
  for (int i = 0; i < 20000; ++i) dvs_test::tally(counts, dvs::sample_exact(problem, rng).tuple);
  const auto gof = dvs::chi_square_gof(counts, dist, 0.01);
  CHECK(gof.conclusive);
  CHECK(gof.pass);
  CHECK(dvs::tv_distance(counts, dist) < 0.02);
}

TEST_CASE("DvsProblem validates its cardinality") {
  CHECK_THROWS_AS(dvs::DvsProblem(dvs::DesignMatrix(star_matrix()), 1), std::domain_error);
  CHECK_THROWS_AS(dvs::DvsProblem(dvs::DesignMatrix(star_matrix()), 4), std::domain_error);
}
