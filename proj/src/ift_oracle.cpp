#include "wda/ift_oracle.hpp"

#include "wda/errors.hpp"

#include <string>

namespace wda {

TransportPlan converged_plan(const CostMatrix& M, double lambda, double tol) {
  for (int iterations = 1000; iterations <= 1 << 21; iterations *= 2) {
    SinkhornResult r = sinkhorn_plan(M, lambda, iterations, tol);
    if (r.trace.residual <= tol) return std::move(r.plan);
  }
  throw NumericalError("converged_plan: Sinkhorn did not reach residual " + format_double(tol));
}

KktSystem assemble_kkt(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                       const Eigen::MatrixXd& Z, double lambda, const TransportPlan& T) {
  const Eigen::Index n = X.cols(), m = Z.cols(), p = P.rows(), d = P.cols();
  if (X.rows() != d || Z.rows() != d || T.rows() != n || T.cols() != m) {
    throw InvalidInputError("assemble_kkt: inconsistent shapes");
  }
  const Eigen::Index nm = n * m;
  const Eigen::Index size = nm + n + m - 1;

  KktSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(size, size);
  sys.rhs = Eigen::MatrixXd::Zero(size, p * d);
  sys.plan.resize(nm);

  Eigen::VectorXd diff(d);
  Eigen::VectorXd proj(p);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index t = i + j * n;
      const double tij = T.weights(i, j);
      if (!(tij > 0.0)) throw NumericalError("assemble_kkt: plan entry is not strictly positive");
      sys.plan(t) = tij;
      sys.matrix(t, t) = 1.0 / tij;
      sys.matrix(t, nm + i) = 1.0;
      sys.matrix(nm + i, t) = 1.0;
      if (j < m - 1) {
        sys.matrix(t, nm + n + j) = 1.0;
        sys.matrix(nm + n + j, t) = 1.0;
      }
      diff = X.col(i) - Z.col(j);
      proj.noalias() = P * diff;
      // d/dP of lambda |P diff|^2, flattened column-major.
      for (Eigen::Index b = 0; b < d; ++b) {
        sys.rhs.row(t).segment(b * p, p) = (2.0 * lambda * diff(b)) * proj.transpose();
      }
    }
  }
  return sys;
}

PlanJacobian ift_jacobian(const Eigen::MatrixXd& P, const Eigen::MatrixXd& X,
                          const Eigen::MatrixXd& Z, double lambda, double tol) {
  if (P.cols() != X.rows() || X.rows() != Z.rows()) {
    throw InvalidInputError("ift_jacobian: projection and sample dimensions differ");
  }
  const Eigen::Index n = X.cols(), m = Z.cols();
  if (n * m > kMaxIftPlanEntries) {
    throw CapacityError("ift_jacobian: " + std::to_string(n * m) + " plan entries exceed the limit of " +
                        std::to_string(kMaxIftPlanEntries));
  }
  const Eigen::MatrixXd PX = P * X;
  const Eigen::MatrixXd PZ = P * Z;
  const CostMatrix M = &X == &Z ? cost_matrix(PX) : cost_matrix(PX, PZ);
  const TransportPlan T = converged_plan(M, lambda, tol);

  PlanJacobian jac;
  jac.n = n;
  jac.m = m;
  jac.p = P.rows();
  jac.d = P.cols();
  if (n * m == 1) {
    jac.entries = Eigen::MatrixXd::Zero(jac.p * jac.d, 1);
    return jac;
  }

  const KktSystem sys = assemble_kkt(P, X, Z, lambda, T);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.matrix);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw NumericalError("ift_jacobian: optimality system is ill-conditioned (rcond " +
                         format_double(rcond) + ")");
  }
  const Eigen::MatrixXd solution = lu.solve(-sys.rhs);
  jac.entries = solution.topRows(n * m).transpose();
  return jac;
}

}  // namespace wda
