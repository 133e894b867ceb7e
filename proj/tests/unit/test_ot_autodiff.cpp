#include "wda/errors.hpp"
#include "wda/ot_autodiff.hpp"
#include "wda/ot_core.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace wda;
using wda::testing::central_difference;
using wda::testing::random_matrix;
using wda::testing::random_orthonormal;
using wda::testing::relative_error;

namespace {

SinkhornResult run(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                   double lambda, int L) {
  return sinkhorn_plan(cost_matrix(P * X, P * Z), lambda, L);
}

}  // namespace

TEST_CASE("kernel gradient vanishes for coincident points") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 1);
  Eigen::MatrixXd X = random_matrix(3, 3, 2);
  Eigen::MatrixXd Z = random_matrix(3, 2, 3);
  Z.col(1) = X.col(0);
  const auto r = run(P, X, Z, 0.7, 5);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  CHECK(kj.at(0, 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(kj.at(1, 0).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("kernel gradient of a single pair") {
  Eigen::MatrixXd P(1, 2);
  P << 1, 0;
  Eigen::MatrixXd X(2, 1), Z(2, 1);
  X << 1, 0;
  Z << 0, 0;
  const auto r = run(P, X, Z, 1.0, 1);
  CHECK(r.trace.kernel(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  Eigen::MatrixXd expected(1, 2);
  expected << -2.0 * std::exp(-1.0), 0.0;
  CHECK((kj.at(0, 0) - expected).cwiseAbs().maxCoeff() <= 1e-15);

  const auto kernel = [&](const Eigen::MatrixXd& Q) {
    return std::exp(-cost_matrix(Q * X, Q * Z).entries(0, 0));
  };
  CHECK(relative_error(kj.at(0, 0), central_difference(kernel, P, 1e-6)) <= 1e-8);
}

TEST_CASE("kernel gradient has the factor lambda") {
  const Eigen::MatrixXd P = random_orthonormal(2, 4, 9);
  const Eigen::MatrixXd X = random_matrix(4, 3, 10), Z = random_matrix(4, 2, 11);
  const double lambda = 0.37;
  const auto r = run(P, X, Z, lambda, 1);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto kij = [&](const Eigen::MatrixXd& Q) {
        return std::exp(-lambda * cost_matrix(Q * X, Q * Z).entries(i, j));
      };
      CHECK(relative_error(kj.at(i, j), central_difference(kij, P, 1e-6)) <= 1e-7);
    }
  }
}

TEST_CASE("vanishing lambda gives vanishing derivatives") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 4);
  const Eigen::MatrixXd X = random_matrix(3, 4, 5), Z = random_matrix(3, 4, 6);
  const auto r = run(P, X, Z, 1e-12, 10);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  CHECK(kj.entries.cwiseAbs().maxCoeff() <= 1e-10);
  const Eigen::MatrixXd W = random_matrix(4, 4, 7);
  CHECK(plan_jacobian_apply(r.trace, kj, W).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("single pair plan has zero derivative") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 4);
  const Eigen::MatrixXd X = random_matrix(3, 1, 12), Z = random_matrix(3, 1, 13);
  const auto r = run(P, X, Z, 1.0, 10);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  Eigen::MatrixXd W(1, 1);
  W << 2.5;
  CHECK(plan_jacobian_apply(r.trace, kj, W).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("contracted derivative matches finite differences of the unrolled map") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::MatrixXd P = random_orthonormal(2, 3, 20 + seed);
    const Eigen::MatrixXd X = random_matrix(3, 4, 30 + seed), Z = random_matrix(3, 4, 40 + seed);
    const Eigen::MatrixXd W = random_matrix(4, 4, 50 + seed);
    const double lambda = 2.0 / cost_matrix(P * X, P * Z).entries.mean();
    const int L = 10;
    const auto r = run(P, X, Z, lambda, L);
    const Eigen::MatrixXd G = plan_jacobian_apply(r.trace, kernel_jacobian(P, X, Z, r.trace), W);
    const auto f = [&](const Eigen::MatrixXd& Q) {
      return run(Q, X, Z, lambda, L).plan.weights.cwiseProduct(W).sum();
    };
    CHECK(relative_error(G, central_difference(f, P, 1e-5)) <= 1e-6);
  }
}

TEST_CASE("full and contracted paths agree") {
  const Eigen::MatrixXd P = random_orthonormal(3, 5, 60);
  const Eigen::MatrixXd X = random_matrix(5, 4, 61), Z = random_matrix(5, 6, 62);
  const double lambda = 1.5 / cost_matrix(P * X, P * Z).entries.mean();
  const auto r = run(P, X, Z, lambda, 15);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  const PlanJacobian full = plan_jacobian_full(r.trace, kj);
  CHECK(full.entries.rows() == 15);
  CHECK(full.entries.cols() == 24);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Eigen::MatrixXd W = random_matrix(4, 6, 70 + seed);
    CHECK(relative_error(plan_jacobian_apply(r.trace, kj, W), contract(full, W)) <= 1e-12);
  }
}

TEST_CASE("full Jacobian matches finite differences entrywise") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 80);
  const Eigen::MatrixXd X = random_matrix(3, 3, 81), Z = random_matrix(3, 3, 82);
  const double lambda = 1.0 / cost_matrix(P * X, P * Z).entries.mean();
  const auto r = run(P, X, Z, lambda, 20);
  const PlanJacobian full = plan_jacobian_full(r.trace, kernel_jacobian(P, X, Z, r.trace));
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      const auto tij = [&](const Eigen::MatrixXd& Q) { return run(Q, X, Z, lambda, 20).plan.weights(i, j); };
      CHECK(relative_error(full.at(i, j), central_difference(tij, P, 1e-5)) <= 1e-6);
    }
  }
}

TEST_CASE("plan derivatives preserve the marginals") {
  const Eigen::MatrixXd P = random_orthonormal(2, 4, 90);
  const Eigen::MatrixXd X = random_matrix(4, 5, 91), Z = random_matrix(4, 4, 92);
  const double lambda = 1.0 / cost_matrix(P * X, P * Z).entries.mean();
  const auto r = run(P, X, Z, lambda, 500);
  const PlanJacobian full = plan_jacobian_full(r.trace, kernel_jacobian(P, X, Z, r.trace));
  for (Eigen::Index i = 0; i < 5; ++i) {
    Eigen::MatrixXd row = Eigen::MatrixXd::Zero(2, 4);
    for (Eigen::Index j = 0; j < 4; ++j) row += full.at(i, j);
    CHECK(row.cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::MatrixXd col = Eigen::MatrixXd::Zero(2, 4);
    for (Eigen::Index i = 0; i < 5; ++i) col += full.at(i, j);
    CHECK(col.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("contraction is linear in the weights") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 100);
  const Eigen::MatrixXd X = random_matrix(3, 4, 101), Z = random_matrix(3, 3, 102);
  const auto r = run(P, X, Z, 0.5, 10);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  const Eigen::MatrixXd A = random_matrix(4, 3, 103), B = random_matrix(4, 3, 104);
  const Eigen::MatrixXd lhs = plan_jacobian_apply(r.trace, kj, 2.0 * A - 3.0 * B);
  const Eigen::MatrixXd rhs = 2.0 * plan_jacobian_apply(r.trace, kj, A) - 3.0 * plan_jacobian_apply(r.trace, kj, B);
  CHECK(relative_error(lhs, rhs) <= 1e-12);
}

TEST_CASE("mismatched inputs are rejected") {
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 110);
  const Eigen::MatrixXd X = random_matrix(3, 4, 111), Z = random_matrix(3, 3, 112);
  const auto r = run(P, X, Z, 0.5, 10);
  const auto other = run(P, X, X, 0.5, 10);
  CHECK_THROWS_AS(kernel_jacobian(P, X, Z, other.trace), InvalidInputError);
  CHECK_THROWS_AS(kernel_jacobian(random_orthonormal(2, 4, 1), X, Z, r.trace), InvalidInputError);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  CHECK_THROWS_AS(plan_jacobian_apply(other.trace, kj, Eigen::MatrixXd::Ones(4, 4)), InvalidInputError);
  CHECK_THROWS_AS(plan_jacobian_apply(r.trace, kj, Eigen::MatrixXd::Ones(3, 4)), InvalidInputError);
}

TEST_CASE("full Jacobian enforces its size guard") {
  const Eigen::Index n = 64, d = 260, p = 4;
  REQUIRE(n * n * p * d > kMaxJacobianEntries);
  const Eigen::MatrixXd P = random_orthonormal(p, d, 120);
  const Eigen::MatrixXd X = random_matrix(d, n, 121), Z = random_matrix(d, n, 122);
  const auto r = run(P, X, Z, 1.0 / cost_matrix(P * X, P * Z).entries.mean(), 2);
  const KernelJacobian kj = kernel_jacobian(P, X, Z, r.trace);
  CHECK_THROWS_AS(plan_jacobian_full(r.trace, kj), CapacityError);
  CHECK_NOTHROW(plan_jacobian_apply(r.trace, kj, Eigen::MatrixXd::Ones(n, n)));
}
