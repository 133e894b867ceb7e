#include "wda/baselines.hpp"

#include "wda/errors.hpp"
#include "wda/objective.hpp"

namespace wda {

ScatterPair uniform_scatter(std::span<const Eigen::MatrixXd> classes) {
  if (classes.size() < 2) throw InvalidInputError("uniform_scatter: at least two classes are required");
  const Eigen::Index d = classes.front().rows();
  ScatterPair s{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t c2 = c; c2 < classes.size(); ++c2) {
      const Eigen::Index n = classes[c].cols(), m = classes[c2].cols();
      const TransportPlan uniform{
          Eigen::MatrixXd::Constant(n, m, 1.0 / static_cast<double>(n * m))};
      const auto cov = cross_covariance(classes[c], classes[c2], uniform);
      (c == c2 ? s.within : s.between) += cov.matrix;
    }
  }
  return s;
}

double rayleigh_quotient(const Eigen::MatrixXd& P, const ScatterPair& scatter) {
  const Eigen::MatrixXd gram = P.transpose() * P;
  return gram.cwiseProduct(scatter.between).sum() / gram.cwiseProduct(scatter.within).sum();
}

FdaModel fda_fit(std::span<const Eigen::MatrixXd> classes, int p) {
  const ScatterPair s = uniform_scatter(classes);
  const Eigen::Index d = s.within.rows();
  if (p < 1 || p > d) throw InvalidInputError("fda_fit: need 1 <= p <= d");

  const double ridge = 1e-10 * s.within.trace() / static_cast<double>(d);
  const Eigen::MatrixXd within = s.within + ridge * Eigen::MatrixXd::Identity(d, d);
  if (Eigen::LLT<Eigen::MatrixXd>(within).info() != Eigen::Success || !(ridge > 0.0)) {
    throw DegenerateInputError("fda_fit: within-class scatter is singular");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.between, within);
  if (eig.info() != Eigen::Success) throw NumericalError("fda_fit: generalized eigensolve failed");

  FdaModel model;
  model.eigenvectors.resize(p, d);
  model.eigenvalues.resize(p);
  for (int k = 0; k < p; ++k) {
    Eigen::VectorXd w = eig.eigenvectors().col(d - 1 - k).normalized();
    Eigen::Index arg = 0;
    w.cwiseAbs().maxCoeff(&arg);
    if (w(arg) < 0.0) w = -w;
    model.eigenvectors.row(k) = w.transpose();
    model.eigenvalues(k) = eig.eigenvalues()(d - 1 - k);
  }
  model.projection = project_stiefel(model.eigenvectors);
  return model;
}

FdaModel fda_fit(const LabeledDataset& data, int p) {
  data.validate();
  const auto classes = data.class_blocks();
  return fda_fit(classes, p);
}

}  // namespace wda
