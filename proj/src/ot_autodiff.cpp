#include "wda/ot_autodiff.hpp"

#include "wda/errors.hpp"

#include <string>

namespace wda {
namespace {

void check_trace(const SinkhornTrace& trace, const EntryJacobian& kjac) {
  if (trace.kernel.rows() != kjac.n || trace.kernel.cols() != kjac.m ||
      kjac.entries.rows() != kjac.p * kjac.d || kjac.entries.cols() != kjac.n * kjac.m) {
    throw InvalidInputError("plan jacobian: kernel jacobian does not match the trace");
  }
  if (trace.iterations < 1 || trace.u.cols() != trace.iterations + 1 ||
      trace.v.cols() != trace.iterations + 1) {
    throw InvalidInputError("plan jacobian: trace does not hold all iterates");
  }
}

struct ScalingTangents {
  Eigen::MatrixXd du;  // (p*d) x n, column i is d u_i^L / dP
  Eigen::MatrixXd dv;  // (p*d) x m, column j is d v_j^L / dP
};

// Propagates d u^k and d v^k through the scaling updates, k = 1..L.
ScalingTangents forward_tangents(const SinkhornTrace& trace, const KernelJacobian& kjac) {
  const Eigen::Index n = kjac.n, m = kjac.m, pd = kjac.p * kjac.d;
  const Eigen::MatrixXd& K = trace.kernel;
  const double row_mass = 1.0 / static_cast<double>(n);
  const double col_mass = 1.0 / static_cast<double>(m);

  ScalingTangents tan{Eigen::MatrixXd::Zero(pd, n), Eigen::MatrixXd::Zero(pd, m)};
  Eigen::MatrixXd dk_weighted(pd, m);
  Eigen::MatrixXd dk_summed(pd, n);
  for (int k = 1; k <= trace.iterations; ++k) {
    const Eigen::VectorXd u_prev = trace.u.col(k - 1);
    const Eigen::VectorXd v_k = trace.v.col(k);

    const Eigen::ArrayXd kt_u = (K.transpose() * u_prev).cwiseMax(kScalingFloor).array();
    for (Eigen::Index j = 0; j < m; ++j) {
      dk_weighted.col(j) = kjac.entries.middleCols(j * n, n) * u_prev;
    }
    tan.dv.noalias() = tan.du * K;
    tan.dv += dk_weighted;
    tan.dv *= (-col_mass / kt_u.square()).matrix().asDiagonal();

    const Eigen::ArrayXd k_v = (K * v_k).cwiseMax(kScalingFloor).array();
    dk_summed.setZero();
    for (Eigen::Index j = 0; j < m; ++j) {
      dk_summed += kjac.entries.middleCols(j * n, n) * v_k(j);
    }
    tan.du.noalias() = tan.dv * K.transpose();
    tan.du += dk_summed;
    tan.du *= (-row_mass / k_v.square()).matrix().asDiagonal();
  }
  return tan;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, Eigen::Index p, Eigen::Index d) {
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), p, d);
}

}  // namespace

KernelJacobian kernel_jacobian(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Z, const SinkhornTrace& trace) {
  if (P.cols() != X.rows() || X.rows() != Z.rows()) {
    throw InvalidInputError("kernel_jacobian: projection and sample dimensions differ");
  }
  if (trace.kernel.rows() != X.cols() || trace.kernel.cols() != Z.cols()) {
    throw InvalidInputError("kernel_jacobian: kernel shape does not match the samples");
  }
  KernelJacobian kjac;
  kjac.n = X.cols();
  kjac.m = Z.cols();
  kjac.p = P.rows();
  kjac.d = P.cols();
  kjac.entries.resize(kjac.p * kjac.d, kjac.n * kjac.m);

  Eigen::VectorXd diff(kjac.d);
  Eigen::VectorXd proj(kjac.p);
  for (Eigen::Index j = 0; j < kjac.m; ++j) {
    for (Eigen::Index i = 0; i < kjac.n; ++i) {
      diff = X.col(i) - Z.col(j);
      proj.noalias() = P * diff;
      const double scale = -2.0 * trace.lambda * trace.kernel(i, j);
      auto col = kjac.entries.col(i + j * kjac.n);
      for (Eigen::Index b = 0; b < kjac.d; ++b) {
        col.segment(b * kjac.p, kjac.p) = (scale * diff(b)) * proj;
      }
    }
  }
  return kjac;
}

Eigen::MatrixXd plan_jacobian_apply(const SinkhornTrace& trace, const KernelJacobian& kjac,
                                    const Eigen::MatrixXd& W) {
  check_trace(trace, kjac);
  if (W.rows() != kjac.n || W.cols() != kjac.m) {
    throw InvalidInputError("plan_jacobian_apply: weight matrix shape does not match the plan");
  }
  const ScalingTangents tan = forward_tangents(trace, kjac);
  const Eigen::VectorXd u = trace.u.col(trace.iterations);
  const Eigen::VectorXd v = trace.v.col(trace.iterations);
  const Eigen::MatrixXd wk = W.cwiseProduct(trace.kernel);

  // T_ij = u_i K_ij v_j: one term per factor.
  Eigen::VectorXd flat = tan.du * (wk * v);
  flat += tan.dv * (wk.transpose() * u);
  const Eigen::MatrixXd wuv = u.asDiagonal() * W * v.asDiagonal();
  flat += kjac.entries * Eigen::Map<const Eigen::VectorXd>(wuv.data(), wuv.size());
  return unflatten(flat, kjac.p, kjac.d);
}

PlanJacobian plan_jacobian_full(const SinkhornTrace& trace, const KernelJacobian& kjac) {
  check_trace(trace, kjac);
  if (kjac.entries.size() > kMaxJacobianEntries) {
    throw CapacityError("plan_jacobian_full: " + std::to_string(kjac.entries.size()) +
                        " entries exceed the limit of " + std::to_string(kMaxJacobianEntries));
  }
  const ScalingTangents tan = forward_tangents(trace, kjac);
  const Eigen::VectorXd u = trace.u.col(trace.iterations);
  const Eigen::VectorXd v = trace.v.col(trace.iterations);
  const Eigen::MatrixXd& K = trace.kernel;

  PlanJacobian jac;
  jac.n = kjac.n;
  jac.m = kjac.m;
  jac.p = kjac.p;
  jac.d = kjac.d;
  jac.entries.resize(kjac.entries.rows(), kjac.entries.cols());
  for (Eigen::Index j = 0; j < kjac.m; ++j) {
    for (Eigen::Index i = 0; i < kjac.n; ++i) {
      jac.entries.col(i + j * kjac.n) = (K(i, j) * v(j)) * tan.du.col(i) +
                                        (u(i) * v(j)) * kjac.entries.col(i + j * kjac.n) +
                                        (u(i) * K(i, j)) * tan.dv.col(j);
    }
  }
  return jac;
}

Eigen::MatrixXd contract(const EntryJacobian& jac, const Eigen::MatrixXd& W) {
  if (W.rows() != jac.n || W.cols() != jac.m) {
    throw InvalidInputError("contract: weight matrix shape does not match the jacobian");
  }
  const Eigen::VectorXd flat =
      jac.entries * Eigen::Map<const Eigen::VectorXd>(W.data(), W.size());
  return unflatten(flat, jac.p, jac.d);
}

}  // namespace wda
