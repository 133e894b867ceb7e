#include "wda/baselines.hpp"
#include "wda/errors.hpp"
#include "wda/stiefel.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace wda;
using wda::testing::random_matrix;
using wda::testing::random_orthonormal;

namespace {

LabeledDataset gaussian_classes(const std::vector<Eigen::VectorXd>& means, Eigen::Index n, std::uint64_t seed,
                                const Eigen::VectorXd& scales) {
  const auto C = static_cast<Eigen::Index>(means.size());
  const Eigen::Index d = scales.size();
  LabeledDataset data;
  data.samples = random_matrix(C * n, d, seed) * scales.asDiagonal();
  for (Eigen::Index c = 0; c < C; ++c) {
    data.samples.middleRows(c * n, n).rowwise() += means[static_cast<std::size_t>(c)].transpose();
    for (Eigen::Index i = 0; i < n; ++i) data.labels.push_back(static_cast<int>(c));
  }
  return data;
}

}  // namespace

TEST_CASE("first discriminant of two isotropic classes follows the mean difference") {
  const Eigen::VectorXd m0 = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(4);
  m1(0) = 3.0;
  const LabeledDataset data = gaussian_classes({m0, m1}, 2000, 1, Eigen::VectorXd::Ones(4));
  const FdaModel model = fda_fit(data, 1);
  CHECK(std::abs(model.eigenvectors(0, 0)) >= 0.99);
  CHECK(model.eigenvectors.row(0).norm() == doctest::Approx(1.0));
  CHECK(model.projection.orthonormality_error() <= 1e-12);
}

TEST_CASE("identical classes have a flat spectrum") {
  const Eigen::MatrixXd X = random_matrix(3, 10, 2);
  const std::vector<Eigen::MatrixXd> classes{X, X};
  const FdaModel model = fda_fit(classes, 3);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(model.eigenvalues(k) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(rayleigh_quotient(model.projection.matrix(), uniform_scatter(classes)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("eigenpairs solve the generalized problem and are sorted") {
  const std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Zero(5), Eigen::VectorXd::LinSpaced(5, 0, 2),
                                           Eigen::VectorXd::LinSpaced(5, 2, -1)};
  const LabeledDataset data = gaussian_classes(means, 30, 3, Eigen::VectorXd::LinSpaced(5, 0.5, 2.0));
  const FdaModel model = fda_fit(data, 3);
  const ScatterPair s = uniform_scatter(data.class_blocks());
  for (Eigen::Index k = 0; k < 3; ++k) {
    const Eigen::VectorXd w = model.eigenvectors.row(k).transpose();
    const Eigen::VectorXd residual = s.between * w - model.eigenvalues(k) * s.within * w;
    CHECK(residual.norm() <= 1e-8 * (s.between * w).norm());
    CHECK(model.eigenvalues(k) >= 0.0);
    if (k > 0) CHECK(model.eigenvalues(k) <= model.eigenvalues(k - 1));
  }
}

TEST_CASE("uniform scatter and quotient") {
  const Eigen::MatrixXd A = random_matrix(3, 4, 4), B = random_matrix(3, 5, 5);
  const std::vector<Eigen::MatrixXd> classes{A, B};
  const ScatterPair s = uniform_scatter(classes);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(3, 3);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) {
      const Eigen::VectorXd delta = A.col(i) - B.col(j);
      between += delta * delta.transpose() / 20.0;
    }
  }
  CHECK((s.between - between).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::MatrixXd P = random_orthonormal(2, 3, 6);
  const double direct = (P * s.between * P.transpose()).trace() / (P * s.within * P.transpose()).trace();
  CHECK(rayleigh_quotient(P, s) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("top discriminants beat random projections") {
  const std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Zero(5), Eigen::VectorXd::LinSpaced(5, 1, 0),
                                           Eigen::VectorXd::LinSpaced(5, -1, 1)};
  const LabeledDataset data = gaussian_classes(means, 25, 7, Eigen::VectorXd::LinSpaced(5, 0.3, 1.5));
  const ScatterPair s = uniform_scatter(data.class_blocks());
  // ratio of traces for one direction, trace of ratios beyond that
  const auto trace_of_ratios = [&](const Eigen::MatrixXd& P) {
    const Eigen::MatrixXd b = P * s.between * P.transpose(), w = P * s.within * P.transpose();
    return w.ldlt().solve(b).trace();
  };
  const double best1 = rayleigh_quotient(fda_fit(data, 1).projection.matrix(), s);
  const double best2 = trace_of_ratios(fda_fit(data, 2).projection.matrix());
  int beaten1 = 0, beaten2 = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    beaten1 += rayleigh_quotient(random_orthonormal(1, 5, 10000 + seed), s) > best1 + 1e-12;
    beaten2 += trace_of_ratios(random_orthonormal(2, 5, 20000 + seed)) > best2 + 1e-12;
  }
  CHECK(beaten1 == 0);
  CHECK(beaten2 == 0);
}

TEST_CASE("translation does not change the discriminants") {
  const std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Zero(3), Eigen::Vector3d(2.0, 0.0, 0.5),
                                           Eigen::Vector3d(0.0, 1.5, -1.0)};
  LabeledDataset data = gaussian_classes(means, 20, 8, Eigen::VectorXd::Ones(3));
  const FdaModel a = fda_fit(data, 2);
  data.samples.rowwise() += Eigen::RowVector3d(10.0, -4.0, 2.5);
  const FdaModel b = fda_fit(data, 2);
  CHECK(max_principal_angle(a.eigenvectors, b.eigenvectors) <= 1e-6);
  CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() <= 1e-8 * a.eigenvalues(0));
}

TEST_CASE("singular within-class scatter is degenerate") {
  const std::vector<Eigen::MatrixXd> classes{Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Ones(3, 2)};
  CHECK_THROWS_AS(fda_fit(classes, 1), DegenerateInputError);
  const std::vector<Eigen::MatrixXd> ok{random_matrix(3, 4, 9), random_matrix(3, 4, 10)};
  CHECK_THROWS_AS(fda_fit(ok, 4), InvalidInputError);
  CHECK_THROWS_AS(fda_fit(ok, 0), InvalidInputError);
}

TEST_CASE("small-lambda WDA recovers the discriminant direction") {
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(4);
  m1 << 1.5, -1.0, 0.5, 0.0;
  const LabeledDataset data =
      gaussian_classes({Eigen::VectorXd::Zero(4), m1}, 40, 11, Eigen::Vector4d(1.0, 2.0, 0.7, 1.3));
  WdaConfig cfg;
  cfg.dim = 1;
  cfg.lambda = 1e-8;
  cfg.max_outer_iter = 500;
  cfg.outer_tol = 1e-12;
  const FitResult fit = wda_fit(data, cfg);
  const FdaModel fda = fda_fit(data, 1);
  CHECK(max_principal_angle(fit.projection.matrix(), fda.projection.matrix()) <= 1e-2);
}
