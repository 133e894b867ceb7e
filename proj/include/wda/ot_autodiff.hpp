#pragma once

// Forward-mode differentiation of the L-iteration Sinkhorn map with respect
// to the projection P (p x d) that produced the cost M_ij = |P(x_i - z_j)|^2.
//
// Per-entry gradients are p x d matrices stored flattened column-major
// (length p*d) as columns of a (p*d) x (n*m) matrix; entry (i, j) lives in
// column i + j*n.

#include "wda/ot_core.hpp"

#include <Eigen/Dense>

namespace wda {

struct EntryJacobian {
  Eigen::Index n = 0, m = 0, p = 0, d = 0;
  Eigen::MatrixXd entries;  // (p*d) x (n*m)

  Eigen::Map<const Eigen::MatrixXd> at(Eigen::Index i, Eigen::Index j) const {
    return {entries.col(i + j * n).data(), p, d};
  }
};

/// dK_ij/dP = -2 lambda K_ij P (x_i - z_j)(x_i - z_j)^T
struct KernelJacobian : EntryJacobian {};

/// dT_ij/dP for the plan after exactly L iterations.
struct PlanJacobian : EntryJacobian {};

/// Largest (n*m*p*d) the full-Jacobian reference path will materialize.
inline constexpr Eigen::Index kMaxJacobianEntries = Eigen::Index{1} << 22;

/// `trace` must come from sinkhorn_plan on cost_matrix(P X, P Z).
KernelJacobian kernel_jacobian(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Z, const SinkhornTrace& trace);

/// sum_ij W_ij dT_ij/dP, accumulated forward through the stored iterates.
Eigen::MatrixXd plan_jacobian_apply(const SinkhornTrace& trace, const KernelJacobian& kjac,
                                    const Eigen::MatrixXd& W);

/// Materialized dT/dP. Reference path for small instances.
PlanJacobian plan_jacobian_full(const SinkhornTrace& trace, const KernelJacobian& kjac);

/// sum_ij W_ij J_ij for any entry Jacobian.
Eigen::MatrixXd contract(const EntryJacobian& jac, const Eigen::MatrixXd& W);

}  // namespace wda
