#include "wda/baselines.hpp"
#include "wda/errors.hpp"
#include "wda/objective.hpp"
#include "wda/stiefel.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace wda;
using wda::testing::central_difference;
using wda::testing::random_matrix;
using wda::testing::random_orthonormal;
using wda::testing::relative_error;

namespace {

std::vector<Eigen::MatrixXd> random_classes(int C, Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                            double separation = 1.5) {
  std::vector<Eigen::MatrixXd> classes;
  for (int c = 0; c < C; ++c) {
    Eigen::MatrixXd X = random_matrix(d, n, seed + 17 * static_cast<std::uint64_t>(c));
    X.row(c % d).array() += separation * c;
    classes.push_back(X);
  }
  return classes;
}

Eigen::MatrixXd pooled(const std::vector<Eigen::MatrixXd>& classes) {
  Eigen::Index total = 0;
  for (const auto& X : classes) total += X.cols();
  Eigen::MatrixXd all(classes.front().rows(), total);
  Eigen::Index at = 0;
  for (const auto& X : classes) {
    all.middleCols(at, X.cols()) = X;
    at += X.cols();
  }
  return all;
}

// Uniform-coupling covariance by a double loop over outer products.
Eigen::MatrixXd brute_uniform_covariance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      const Eigen::VectorXd delta = X.col(i) - Z.col(j);
      C += delta * delta.transpose();
    }
  }
  return C / static_cast<double>(X.cols() * Z.cols());
}

WdaConfig config(double lambda, int L) {
  WdaConfig cfg;
  cfg.lambda = lambda;
  cfg.sinkhorn_iters = L;
  return cfg;
}

}  // namespace

TEST_CASE("adaptive lambda divides by the mean squared distance") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  const std::vector<Eigen::MatrixXd> classes{I.leftCols(2), I.rightCols(2)};
  const PairLambdas l = adaptive_lambdas(I, classes, 0.3);
  CHECK(l(0, 1) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(l(1, 0) == l(0, 1));
  CHECK(l(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("adaptive lambda of a pair at mean squared distance 9") {
  Eigen::MatrixXd A(1, 2), B(1, 2);
  A << -1, 1;
  B << 2 * std::sqrt(2.0), -2 * std::sqrt(2.0);
  const std::vector<Eigen::MatrixXd> classes{A, B};
  const PairLambdas l = adaptive_lambdas(Eigen::MatrixXd::Identity(1, 1), classes, 0.01);
  CHECK(std::abs(l(0, 1) - 1.0 / 900.0) <= 1e-12 / 900.0);
}

TEST_CASE("adaptive lambda matches a double-loop mean") {
  const auto classes = random_classes(3, 5, 4, 7);
  const Eigen::MatrixXd P0 = random_orthonormal(2, 4, 8);
  const PairLambdas l = adaptive_lambdas(P0, classes, 0.01);
  for (int c = 0; c < 3; ++c) {
    for (int c2 = 0; c2 < 3; ++c2) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 5; ++j) sum += (P0 * (classes[c].col(i) - classes[c2].col(j))).squaredNorm();
      CHECK(std::abs(l(c, c2) - 0.01 / (sum / 25.0)) <= 1e-12 * l(c, c2));
    }
  }
}

TEST_CASE("adaptive lambda rejects coincident projections") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  const std::vector<Eigen::MatrixXd> classes{X, 2.0 * X};
  CHECK_THROWS_AS(adaptive_lambdas(Eigen::MatrixXd::Identity(3, 3), classes, 0.01), DegenerateInputError);
}

TEST_CASE("cross-covariance of a single pair") {
  Eigen::MatrixXd X(2, 1), Z(2, 1);
  X << 1, 0;
  Z << 0, 0;
  const CrossCovariance C = cross_covariance(X, Z, TransportPlan{Eigen::MatrixXd::Ones(1, 1)});
  Eigen::Matrix2d expected;
  expected << 1, 0, 0, 0;
  CHECK((C.matrix - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("cross-covariance vanishes when mass sits on identical points") {
  const Eigen::MatrixXd X = random_matrix(3, 4, 1);
  const Eigen::MatrixXd T = Eigen::VectorXd::Constant(4, 0.25).asDiagonal();
  CHECK(cross_covariance(X, X, TransportPlan{T}).matrix.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("uniform cross-covariance matches the double loop") {
  const Eigen::MatrixXd X = random_matrix(4, 5, 2), Z = random_matrix(4, 3, 3);
  const CrossCovariance C =
      cross_covariance(X, Z, TransportPlan{Eigen::MatrixXd::Constant(5, 3, 1.0 / 15)}, 0, 1);
  CHECK((C.matrix - brute_uniform_covariance(X, Z)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(C.matrix == C.matrix.transpose());
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C.matrix).eigenvalues().minCoeff() >= -1e-12);
  CHECK(C.source_class == 0);
  CHECK(C.target_class == 1);
}

TEST_CASE("cross-covariance rejects inconsistent shapes") {
  const Eigen::MatrixXd X = random_matrix(4, 5, 2), Z = random_matrix(4, 3, 3);
  CHECK_THROWS_AS(cross_covariance(X, Z, TransportPlan{Eigen::MatrixXd::Ones(3, 5)}), InvalidInputError);
  CHECK_THROWS_AS(cross_covariance(X, random_matrix(3, 3, 4), TransportPlan{Eigen::MatrixXd::Ones(5, 3)}),
                  InvalidInputError);
}

TEST_CASE("two identical classes give one half") {
  const Eigen::MatrixXd X = random_matrix(4, 6, 5);
  const std::vector<Eigen::MatrixXd> classes{X, X};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::MatrixXd P = random_orthonormal(2, 4, 10 + seed);
    const PairLambdas l = adaptive_lambdas(P, classes, 0.1);
    const auto state = evaluate(P, classes, l, config(0.1, 10));
    CHECK(state.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(state.pairs.size() == 3);

    const auto g = gradient(P, classes, l, config(0.1, 10));
    CHECK(g.gradient.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("near-zero lambda reproduces the uniform-coupling quotient") {
  const auto classes = random_classes(2, 7, 5, 20);
  const Eigen::MatrixXd P = random_orthonormal(2, 5, 21);
  const auto state = evaluate(P, classes, PairLambdas::constant(2, 1e-12), config(1e-12, 10));

  const Eigen::MatrixXd Cb = brute_uniform_covariance(classes[0], classes[1]);
  const Eigen::MatrixXd Cw =
      brute_uniform_covariance(classes[0], classes[0]) + brute_uniform_covariance(classes[1], classes[1]);
  const Eigen::MatrixXd G = P.transpose() * P;
  const double quotient = G.cwiseProduct(Cb).sum() / G.cwiseProduct(Cw).sum();
  CHECK(std::abs(state.value - quotient) <= 1e-9 * quotient);
  CHECK(std::abs(rayleigh_quotient(P, uniform_scatter(classes)) - quotient) <= 1e-12 * quotient);
}

TEST_CASE("small-lambda gradient approaches the quotient gradient") {
  const auto classes = random_classes(2, 6, 4, 30);
  const Eigen::MatrixXd P = random_orthonormal(2, 4, 31);
  const PairLambdas l = adaptive_lambdas(pca_init(pooled(classes), 2).matrix(), classes, 1e-8);
  const auto g = gradient(P, classes, l, config(1e-8, 10));

  const ScatterPair s = uniform_scatter(classes);
  const auto quotient = [&](const Eigen::MatrixXd& Q) { return rayleigh_quotient(Q, s); };
  const double sb = (P.transpose() * P).cwiseProduct(s.between).sum();
  const double sw = (P.transpose() * P).cwiseProduct(s.within).sum();
  const Eigen::MatrixXd analytic = P * ((2.0 / sw) * s.between - (2.0 * sb / (sw * sw)) * s.within);
  CHECK(relative_error(analytic, central_difference(quotient, P, 1e-6)) <= 1e-8);
  CHECK(relative_error(g.gradient, analytic) <= 1e-4);
}

TEST_CASE("full orthogonal projections all give the same value") {
  const auto classes = random_classes(3, 5, 3, 40);
  const PairLambdas l = adaptive_lambdas(Eigen::MatrixXd::Identity(3, 3), classes, 0.5);
  const double reference = evaluate(Eigen::MatrixXd::Identity(3, 3), classes, l, config(0.5, 10)).value;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd Q = random_orthonormal(3, 3, 50 + seed);
    CHECK(evaluate(Q, classes, l, config(0.5, 10)).value == doctest::Approx(reference).epsilon(1e-11));

    // Riemannian gradient on the orthogonal group: the skew part of G Q^T.
    const Eigen::MatrixXd G = gradient(Q, classes, l, config(0.5, 10)).gradient;
    const Eigen::MatrixXd skew = G * Q.transpose() - Q * G.transpose();
    CHECK(skew.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, G.norm()));
  }
}

TEST_CASE("value does not depend on the order of samples within a class") {
  auto classes = random_classes(3, 6, 4, 60);
  const Eigen::MatrixXd P = random_orthonormal(2, 4, 61);
  const PairLambdas l = adaptive_lambdas(P, classes, 0.2);
  const double before = evaluate(P, classes, l, config(0.2, 10)).value;
  std::vector<int> order(6);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[1], order[4]);
  for (auto& X : classes) {
    Eigen::MatrixXd shuffled(X.rows(), X.cols());
    for (int j = 0; j < 6; ++j) shuffled.col(j) = X.col(order[static_cast<std::size_t>(j)]);
    X = shuffled;
  }
  CHECK(evaluate(P, classes, l, config(0.2, 10)).value == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("state is consistent") {
  const auto classes = random_classes(3, 5, 4, 70);
  const Eigen::MatrixXd P = random_orthonormal(2, 4, 71);
  const PairLambdas l = adaptive_lambdas(P, classes, 0.3);
  const auto s = evaluate(P, classes, l, config(0.3, 10));
  CHECK(s.pairs.size() == 6);
  CHECK(s.value == doctest::Approx(s.sigma_b2 / s.sigma_w2));
  CHECK(s.value >= 0.0);
  CHECK((s.between - s.between.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.within).eigenvalues().minCoeff() >= -1e-12);
  for (const auto& pair : s.pairs) {
    CHECK(pair.source <= pair.target);
    CHECK(pair.lambda == l(pair.source, pair.target));
    CHECK(pair.distance > 0.0);
  }
  const auto j = s.to_json();
  CHECK(j.at("pairs").size() == 6);
  CHECK(j.at("objective").get<double>() == s.value);
}

TEST_CASE("gradient matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto classes = random_classes(3, 8, 6, 100 + 10 * seed);
    const Eigen::MatrixXd P = random_orthonormal(2, 6, 101 + 10 * seed);
    const PairLambdas l = adaptive_lambdas(pca_init(pooled(classes), 2).matrix(), classes, 0.1);
    const WdaConfig cfg = config(0.1, 10);
    const auto g = gradient(P, classes, l, cfg);
    const auto J = [&](const Eigen::MatrixXd& Q) { return evaluate(Q, classes, l, cfg).value; };
    CHECK(relative_error(g.gradient, central_difference(J, P, 1e-5)) <= 1e-5);
    CHECK(relative_error(g.gradient, g.fixed_plan_term) > 1e-6);
  }
}

TEST_CASE("class weighting") {
  const std::vector<Eigen::MatrixXd> unbalanced{random_matrix(2, 2, 1), random_matrix(2, 6, 2)};
  const Eigen::MatrixXd w = pair_weights(unbalanced, true);
  CHECK(w(0, 0) == doctest::Approx(2 * 0.25));
  CHECK(w(1, 1) == doctest::Approx(2 * 0.75));
  CHECK(w(0, 1) == doctest::Approx(4 * 0.25 * 0.75));
  CHECK(pair_weights(unbalanced, false) == Eigen::MatrixXd::Ones(2, 2));

  const auto balanced = random_classes(3, 4, 3, 80);
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 81);
  const PairLambdas l = adaptive_lambdas(P, balanced, 0.2);
  WdaConfig weighted = config(0.2, 10);
  weighted.class_weighting = true;
  CHECK(evaluate(P, balanced, l, weighted).value ==
        doctest::Approx(evaluate(P, balanced, l, config(0.2, 10)).value).epsilon(1e-14));

  const PairLambdas lu = adaptive_lambdas(P.leftCols(2), unbalanced, 0.2);
  const auto gu = gradient(P.leftCols(2), unbalanced, lu, [] {
    WdaConfig c = config(0.2, 10);
    c.class_weighting = true;
    return c;
  }());
  const auto J = [&](const Eigen::MatrixXd& Q) {
    WdaConfig c = config(0.2, 10);
    c.class_weighting = true;
    return evaluate(Q, unbalanced, lu, c).value;
  };
  CHECK(relative_error(gu.gradient, central_difference(J, P.leftCols(2), 1e-5)) <= 1e-5);
}

TEST_CASE("zero within-class spread is degenerate") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 3);
  const Eigen::MatrixXd B = Eigen::MatrixXd::Ones(2, 3);
  const std::vector<Eigen::MatrixXd> classes{A, B};
  CHECK_THROWS_AS(evaluate(Eigen::MatrixXd::Identity(2, 2), classes, PairLambdas::constant(2, 0.1),
                           config(0.1, 10)),
                  DegenerateInputError);
}

TEST_CASE("kernel underflow propagates") {
  const auto classes = random_classes(2, 4, 3, 90, 50.0);
  CHECK_THROWS_AS(evaluate(Eigen::MatrixXd::Identity(3, 3), classes, PairLambdas::constant(2, 1e3),
                           config(1e3, 10)),
                  NumericalRangeError);
}

TEST_CASE("evaluate rejects malformed inputs") {
  const auto classes = random_classes(2, 4, 3, 91);
  const std::vector<Eigen::MatrixXd> single{classes[0]};
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 92);
  CHECK_THROWS_AS(evaluate(P, single, PairLambdas::constant(1, 0.1), config(0.1, 10)), InvalidInputError);
  CHECK_THROWS_AS(evaluate(P, classes, PairLambdas::constant(3, 0.1), config(0.1, 10)), InvalidInputError);
  CHECK_THROWS_AS(evaluate(random_orthonormal(2, 4, 93), classes, PairLambdas::constant(2, 0.1), config(0.1, 10)),
                  InvalidInputError);
}

TEST_CASE("config validation names the field") {
  WdaConfig cfg;
  CHECK_NOTHROW(cfg.validate(10));
  cfg.lambda = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("'lambda'"), InvalidInputError);
  cfg = WdaConfig{};
  cfg.sinkhorn_iters = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("'sinkhorn_iters'"), InvalidInputError);
  cfg = WdaConfig{};
  cfg.dim = 11;
  CHECK_THROWS_WITH_AS(cfg.validate(10), doctest::Contains("'dim'"), InvalidInputError);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config JSON round trip and partial override") {
  WdaConfig cfg;
  cfg.lambda = 0.25;
  cfg.dim = 3;
  cfg.class_weighting = true;
  cfg.seed = 99;
  const WdaConfig back = WdaConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  const WdaConfig partial = WdaConfig::from_json(nlohmann::json{{"sinkhorn_iters", 4}}, cfg);
  CHECK(partial.sinkhorn_iters == 4);
  CHECK(partial.lambda == 0.25);
  CHECK_THROWS_WITH_AS(WdaConfig::from_json(nlohmann::json{{"lambda", "big"}}), doctest::Contains("'lambda'"),
                       InvalidInputError);
}
