#pragma once

// The discriminant ratio J(P) = <P^T P, C_b> / <P^T P, C_w>, where the
// cross-covariances are weighted by entropic transport plans computed in the
// projected space. Class blocks are d x n_c (one sample per column).

#include "wda/ot_core.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace wda {

struct WdaConfig {
  double lambda = 0.01;
  int sinkhorn_iters = 10;
  int dim = 2;
  int max_outer_iter = 100;
  double outer_tol = 1e-6;
  double initial_step = 1.0;
  double step_shrink = 0.5;
  double sufficient_increase = 1e-4;
  int max_backtracks = 30;
  double sinkhorn_tol = 1e-9;
  bool class_weighting = false;
  std::uint64_t seed = 0;

  /// Throws InvalidInputError naming the first offending field. A positive
  /// `input_dim` also checks dim <= input_dim.
  void validate(Eigen::Index input_dim = 0) const;

  nlohmann::json to_json() const;
  /// Fields missing from `j` keep their values in `base`.
  static WdaConfig from_json(const nlohmann::json& j, const WdaConfig& base);
  static WdaConfig from_json(const nlohmann::json& j);
};

/// Symmetric per-pair regularization, fixed before optimization starts.
class PairLambdas {
public:
  PairLambdas() = default;
  explicit PairLambdas(Eigen::MatrixXd values);
  static PairLambdas constant(int classes, double lambda);

  int classes() const { return static_cast<int>(values_.rows()); }
  double operator()(int c, int c2) const { return values_(c, c2); }
  const Eigen::MatrixXd& values() const { return values_; }

private:
  Eigen::MatrixXd values_;
};

/// lambda_{c,c'} = lambda / mean_{i,j} |P0 x_i^c - P0 x_j^c'|^2.
PairLambdas adaptive_lambdas(const Eigen::MatrixXd& P0, std::span<const Eigen::MatrixXd> classes,
                             double lambda);

struct CrossCovariance {
  Eigen::MatrixXd matrix;  // sum_ij T_ij (x_i - z_j)(x_i - z_j)^T
  int source_class = 0;
  int target_class = 0;
};

CrossCovariance cross_covariance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                 const TransportPlan& T, int source_class = 0,
                                 int target_class = 0);

struct PairState {
  int source = 0;
  int target = 0;
  double lambda = 0.0;
  double weight = 1.0;
  CostMatrix cost;  // in the projected space
  SinkhornResult sinkhorn;
  double distance = 0.0;  // <T, M>
  CrossCovariance covariance;

  bool intra() const { return source == target; }
};

struct ObjectiveState {
  Eigen::MatrixXd between;  // C_b
  Eigen::MatrixXd within;   // C_w
  double sigma_b2 = 0.0;
  double sigma_w2 = 0.0;
  double value = 0.0;
  std::vector<PairState> pairs;  // c <= c', row-major order
  PairLambdas lambdas;

  nlohmann::json to_json() const;
};

/// Pair weights: 1 by default; with class weighting, C^2 pi_c pi_c' between
/// classes and C pi_c within, pi_c = n_c / n.
Eigen::MatrixXd pair_weights(std::span<const Eigen::MatrixXd> classes, bool class_weighting);

ObjectiveState evaluate(const Eigen::MatrixXd& P, std::span<const Eigen::MatrixXd> classes,
                        const PairLambdas& lambdas, const WdaConfig& cfg);

struct ObjectiveGradient {
  ObjectiveState state;
  Eigen::MatrixXd fixed_plan_term;  // dJ/dP with every plan held constant
  Eigen::MatrixXd gradient;         // full dJ/dP including plan sensitivities
};

ObjectiveGradient gradient(const Eigen::MatrixXd& P, std::span<const Eigen::MatrixXd> classes,
                           const PairLambdas& lambdas, const WdaConfig& cfg);

}  // namespace wda
