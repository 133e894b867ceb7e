#pragma once

#include "wda/datasets.hpp"
#include "wda/objective.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace wda {

/// p x d matrix with orthonormal rows. Maps a sample x to P x.
class ProjectionMatrix {
public:
  ProjectionMatrix() = default;

  /// Checks P P^T = I within `tol`; throws InvalidInputError otherwise.
  static ProjectionMatrix from_orthonormal(Eigen::MatrixXd rows, double tol = 1e-10);

  const Eigen::MatrixXd& matrix() const { return rows_; }
  Eigen::Index dim() const { return rows_.rows(); }
  Eigen::Index input_dim() const { return rows_.cols(); }

  /// Projects n x d samples (one per row) to n x p.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& samples) const;
  LabeledDataset apply(const LabeledDataset& data) const;

  /// max |P P^T - I|
  double orthonormality_error() const;

private:
  explicit ProjectionMatrix(Eigen::MatrixXd rows) : rows_(std::move(rows)) {}
  Eigen::MatrixXd rows_;

  friend ProjectionMatrix project_stiefel(const Eigen::MatrixXd& A);
};

/// Closest matrix with orthonormal rows in Frobenius norm: the polar factor U V^T.
ProjectionMatrix project_stiefel(const Eigen::MatrixXd& A);

/// Top-p eigenvectors of the centered covariance of `X` (d x n, one sample per
/// column), each signed so its largest-magnitude entry is positive.
ProjectionMatrix pca_init(const Eigen::MatrixXd& X, int p);
ProjectionMatrix pca_init(const LabeledDataset& data, int p);

/// Canonical angles (radians, ascending) between the row spaces of A and B.
Eigen::VectorXd principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double step = 0.0;
  double gradient_norm = 0.0;
  int backtracks = 0;
  double seconds = 0.0;
};

struct FitReport {
  std::vector<IterationRecord> iterations;  // entry 0 is the initial point
  std::string termination;  // "converged", "stationary", "stalled", "max_iter"
  double initial_objective = 0.0;
  double best_objective = 0.0;
  PairLambdas lambdas;
  WdaConfig config;

  nlohmann::json to_json() const;
};

struct FitResult {
  ProjectionMatrix projection;
  FitReport report;
};

/// Projected gradient ascent of J from the PCA initialization with per-pair
/// regularization fixed at that initialization and Armijo backtracking.
FitResult wda_fit(const LabeledDataset& data, const WdaConfig& cfg);

}  // namespace wda
