#pragma once

// Jacobian of the converged entropic plan obtained by linearizing its
// optimality conditions (implicit function theorem). Slow and dense; only
// used to check the unrolled derivatives.

#include "wda/ot_autodiff.hpp"

#include <Eigen/Dense>

namespace wda {

/// Linearized optimality system E [dT; dalpha; dbeta] = -dg/dP.
///
/// Unknown order: vec(T) column-major (entry (i, j) at i + j*n), then alpha
/// (n), then beta without its last component (m - 1). The dropped multiplier
/// is pinned to zero; the marginal constraints share their total mass, so
/// keeping it would leave E singular.
struct KktSystem {
  Eigen::MatrixXd matrix;  // E, (nm + n + m - 1) square
  Eigen::MatrixXd rhs;     // dg/dP, (nm + n + m - 1) x (p*d)
  Eigen::VectorXd plan;    // vec(T) at the solution
};

/// Largest n*m the oracle accepts.
inline constexpr Eigen::Index kMaxIftPlanEntries = 400;

/// Solves for a plan whose marginal residual is at most `tol`.
TransportPlan converged_plan(const CostMatrix& M, double lambda, double tol = 1e-12);

KktSystem assemble_kkt(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                       const Eigen::MatrixXd& Z, double lambda, const TransportPlan& T);

PlanJacobian ift_jacobian(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& Z, double lambda, double tol = 1e-12);

}  // namespace wda
