#include "wda/stiefel.hpp"

#include "wda/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace wda {

ProjectionMatrix ProjectionMatrix::from_orthonormal(Eigen::MatrixXd rows, double tol) {
  if (rows.rows() < 1 || rows.rows() > rows.cols()) {
    throw InvalidInputError("projection: need 1 <= p <= d");
  }
  ProjectionMatrix P(std::move(rows));
  if (!(P.orthonormality_error() <= tol)) {
    throw InvalidInputError("projection: rows are not orthonormal (error " +
                            format_double(P.orthonormality_error()) + ")");
  }
  return P;
}

Eigen::MatrixXd ProjectionMatrix::apply(const Eigen::MatrixXd& samples) const {
  if (samples.cols() != input_dim()) {
    throw InvalidInputError("projection: data has " + std::to_string(samples.cols()) +
                            " features, projection expects " + std::to_string(input_dim()));
  }
  return samples * rows_.transpose();
}

LabeledDataset ProjectionMatrix::apply(const LabeledDataset& data) const {
  LabeledDataset out;
  out.samples = apply(data.samples);
  out.labels = data.labels;
  for (Eigen::Index k = 0; k < dim(); ++k) out.feature_names.push_back("z" + std::to_string(k));
  return out;
}

double ProjectionMatrix::orthonormality_error() const {
  const Eigen::MatrixXd gram = rows_ * rows_.transpose();
  return (gram - Eigen::MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff();
}

ProjectionMatrix project_stiefel(const Eigen::MatrixXd& A) {
  if (A.rows() < 1 || A.rows() > A.cols()) {
    throw InvalidInputError("project_stiefel: need 1 <= rows <= cols");
  }
  if (!A.allFinite()) throw InvalidInputError("project_stiefel: non-finite input");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(s.size() - 1) <= 1e-12 * s(0)) {
    throw DegenerateInputError("project_stiefel: input does not have full row rank");
  }
  return ProjectionMatrix(svd.matrixU() * svd.matrixV().transpose());
}

ProjectionMatrix pca_init(const Eigen::MatrixXd& X, int p) {
  const Eigen::Index d = X.rows();
  const Eigen::Index n = X.cols();
  if (n < 2) throw InvalidInputError("pca_init: need at least 2 samples");
  if (p < 1 || p > d) throw InvalidInputError("pca_init: need 1 <= p <= d");

  const Eigen::MatrixXd centered = X.colwise() - X.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca_init: eigendecomposition failed");

  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values(d - 1);
  if (!(top > 0.0) || values(d - p) <= 1e-12 * top) {
    throw DegenerateInputError("pca_init: p = " + std::to_string(p) +
                               " exceeds the rank of the centered data");
  }
  Eigen::MatrixXd rows(p, d);
  for (int k = 0; k < p; ++k) {
    Eigen::VectorXd vec = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    vec.cwiseAbs().maxCoeff(&arg);
    if (vec(arg) < 0.0) vec = -vec;
    rows.row(k) = vec.transpose();
  }
  return project_stiefel(rows);
}

ProjectionMatrix pca_init(const LabeledDataset& data, int p) {
  return pca_init(Eigen::MatrixXd(data.samples.transpose()), p);
}

Eigen::VectorXd principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw InvalidInputError("principal_angles: ambient dimensions differ");
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(A.transpose()).householderQ() *
                             Eigen::MatrixXd::Identity(A.cols(), A.rows());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(B.transpose()).householderQ() *
                             Eigen::MatrixXd::Identity(B.cols(), B.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const Eigen::VectorXd s = svd.singularValues();  // descending -> ascending angles
  Eigen::VectorXd angles(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) angles(k) = std::acos(std::clamp(s(k), -1.0, 1.0));
  return angles;
}

double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::VectorXd angles = principal_angles(A, B);
  return angles.size() == 0 ? 0.0 : angles.maxCoeff();
}

nlohmann::json FitReport::to_json() const {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& it : iterations) {
    iters.push_back({{"iteration", it.iteration},
                     {"objective", it.objective},
                     {"step", it.step},
                     {"gradient_norm", it.gradient_norm},
                     {"backtracks", it.backtracks},
                     {"seconds", it.seconds}});
  }
  return {{"termination", termination},
          {"initial_objective", initial_objective},
          {"best_objective", best_objective},
          {"pair_lambdas", matrix_to_json(lambdas.values())},
          {"config", config.to_json()},
          {"iterations", iters}};
}

FitResult wda_fit(const LabeledDataset& data, const WdaConfig& cfg) {
  using clock = std::chrono::steady_clock;
  data.validate();
  cfg.validate(data.dim());
  if (data.num_classes() < 2) throw InvalidInputError("wda_fit: at least two classes are required");
  for (auto count : data.class_counts()) {
    if (count < 2) throw DegenerateInputError("wda_fit: every class needs at least 2 samples");
  }

  const std::vector<Eigen::MatrixXd> classes = data.class_blocks();
  auto start = clock::now();
  ProjectionMatrix P = pca_init(data, cfg.dim);

  FitResult result;
  FitReport& report = result.report;
  report.config = cfg;
  report.lambdas = adaptive_lambdas(P.matrix(), classes, cfg.lambda);

  ObjectiveGradient current = gradient(P.matrix(), classes, report.lambdas, cfg);
  report.initial_objective = current.state.value;
  const auto seconds_since = [](clock::time_point t) {
    return std::chrono::duration<double>(clock::now() - t).count();
  };
  report.iterations.push_back(
      {0, current.state.value, 0.0, current.gradient.norm(), 0, seconds_since(start)});

  report.termination = "max_iter";
  for (int iter = 1; iter <= cfg.max_outer_iter; ++iter) {
    start = clock::now();
    const double J = current.state.value;
    const Eigen::MatrixXd& G = current.gradient;
    // Ascent: J is maximized.
    const Eigen::MatrixXd D = project_stiefel(P.matrix() + G).matrix() - P.matrix();
    const double slope = G.cwiseProduct(D).sum();
    if (D.norm() <= 1e-12 || !(slope > 0.0)) {
      report.termination = "stationary";
      break;
    }

    double step = cfg.initial_step;
    bool accepted = false;
    int backtracks = 0;
    ProjectionMatrix candidate;
    for (; backtracks <= cfg.max_backtracks; ++backtracks) {
      candidate = project_stiefel(P.matrix() + step * D);
      const double trial = evaluate(candidate.matrix(), classes, report.lambdas, cfg).value;
      if (trial >= J + cfg.sufficient_increase * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.step_shrink;
    }
    if (!accepted) {
      report.termination = "stalled";
      break;
    }

    P = candidate;
    current = gradient(P.matrix(), classes, report.lambdas, cfg);
    const double J_new = current.state.value;
    report.iterations.push_back(
        {iter, J_new, step, current.gradient.norm(), backtracks, seconds_since(start)});
    if (std::abs(J_new - J) <= cfg.outer_tol * std::max(std::abs(J), 1e-300)) {
      report.termination = "converged";
      break;
    }
  }

  report.best_objective = current.state.value;
  result.projection = P;
  return result;
}

}  // namespace wda
