#pragma once

// Entropic-regularized optimal transport between uniform empirical measures.
//
// Sample matrices are d x n: one sample per column. Plans are n x m with
// row marginal 1_n/n and column marginal 1_m/m.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace wda {

/// Pairwise squared Euclidean distances, entry (i, j) = |x_i - z_j|^2.
struct CostMatrix {
  Eigen::MatrixXd entries;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

struct TransportPlan {
  Eigen::MatrixXd weights;

  Eigen::Index rows() const { return weights.rows(); }
  Eigen::Index cols() const { return weights.cols(); }

  /// max(|T 1_m - 1_n/n|_inf, |T^T 1_n - 1_m/m|_inf)
  double marginal_residual() const;
};

/// Everything the unrolled differentiation needs from a Sinkhorn run.
struct SinkhornTrace {
  Eigen::MatrixXd kernel;  // K_ij = exp(-lambda M_ij)
  Eigen::MatrixXd u;       // n x (L+1), column k is u^k, u^0 = 1_n
  Eigen::MatrixXd v;       // m x (L+1), column k is v^k for k >= 1; column 0 unused
  double lambda = 0.0;
  int iterations = 0;
  double residual = 0.0;   // marginal residual of the final plan
  int converged_at = -1;   // first k with residual < tol, -1 if never

  Eigen::VectorXd u_at(int k) const { return u.col(k); }
  Eigen::VectorXd v_at(int k) const { return v.col(k); }
};

struct SinkhornResult {
  TransportPlan plan;
  SinkhornTrace trace;
};

/// Denominator floor applied in the scaling updates.
inline constexpr double kScalingFloor = 1e-300;

CostMatrix cost_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z);

/// Self cost: exactly symmetric with an exact zero diagonal.
CostMatrix cost_matrix(const Eigen::MatrixXd& X);

/// Runs exactly `iterations` Sinkhorn updates starting from u^0 = 1_n.
/// `tol` only controls the reported `converged_at`; iteration never stops early.
SinkhornResult sinkhorn_plan(const CostMatrix& M, double lambda, int iterations,
                             double tol = 1e-9);

/// <T, M>
double regularized_distance(const TransportPlan& T, const CostMatrix& M);

/// lambda <T, M> - Omega(T), Omega(T) = -sum t log t.
double entropic_objective(const TransportPlan& T, const CostMatrix& M, double lambda);

// Dense matrix serialization: CSV is row-major with no header; JSON is
// {"rows": r, "cols": c, "data": [row-major values]}.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& A);
Eigen::MatrixXd read_matrix_csv(std::istream& is);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& A);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace wda
