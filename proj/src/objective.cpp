#include "wda/objective.hpp"

#include "wda/errors.hpp"
#include "wda/ot_autodiff.hpp"

#include <cmath>
#include <string>

namespace wda {

void WdaConfig::validate(Eigen::Index input_dim) const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw InvalidInputError("invalid config field '" + field + "': " + why);
  };
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda", "must be positive and finite");
  if (sinkhorn_iters < 1) fail("sinkhorn_iters", "must be >= 1");
  if (dim < 1) fail("dim", "must be >= 1");
  if (input_dim > 0 && dim > input_dim) {
    fail("dim", "must not exceed the input dimension " + std::to_string(input_dim));
  }
  if (max_outer_iter < 0) fail("max_outer_iter", "must be >= 0");
  if (!(outer_tol >= 0.0)) fail("outer_tol", "must be >= 0");
  if (!(initial_step > 0.0)) fail("initial_step", "must be positive");
  if (!(step_shrink > 0.0 && step_shrink < 1.0)) fail("step_shrink", "must lie in (0, 1)");
  if (!(sufficient_increase >= 0.0 && sufficient_increase < 1.0)) {
    fail("sufficient_increase", "must lie in [0, 1)");
  }
  if (max_backtracks < 0) fail("max_backtracks", "must be >= 0");
  if (!(sinkhorn_tol > 0.0)) fail("sinkhorn_tol", "must be positive");
}

nlohmann::json WdaConfig::to_json() const {
  return {{"lambda", lambda},
          {"sinkhorn_iters", sinkhorn_iters},
          {"dim", dim},
          {"max_outer_iter", max_outer_iter},
          {"outer_tol", outer_tol},
          {"initial_step", initial_step},
          {"step_shrink", step_shrink},
          {"sufficient_increase", sufficient_increase},
          {"max_backtracks", max_backtracks},
          {"sinkhorn_tol", sinkhorn_tol},
          {"class_weighting", class_weighting},
          {"seed", seed}};
}

WdaConfig WdaConfig::from_json(const nlohmann::json& j) { return from_json(j, WdaConfig{}); }

WdaConfig WdaConfig::from_json(const nlohmann::json& j, const WdaConfig& defaults) {
  WdaConfig base = defaults;
  const auto take = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError(std::string("invalid config field '") + key + "': " + e.what());
    }
  };
  take("lambda", base.lambda);
  take("sinkhorn_iters", base.sinkhorn_iters);
  take("dim", base.dim);
  take("max_outer_iter", base.max_outer_iter);
  take("outer_tol", base.outer_tol);
  take("initial_step", base.initial_step);
  take("step_shrink", base.step_shrink);
  take("sufficient_increase", base.sufficient_increase);
  take("max_backtracks", base.max_backtracks);
  take("sinkhorn_tol", base.sinkhorn_tol);
  take("class_weighting", base.class_weighting);
  take("seed", base.seed);
  return base;
}

PairLambdas::PairLambdas(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) throw InvalidInputError("PairLambdas: matrix must be square");
}

PairLambdas PairLambdas::constant(int classes, double lambda) {
  return PairLambdas(Eigen::MatrixXd::Constant(classes, classes, lambda));
}

PairLambdas adaptive_lambdas(const Eigen::MatrixXd& P0, std::span<const Eigen::MatrixXd> classes,
                             double lambda) {
  if (!(lambda > 0.0)) throw InvalidInputError("adaptive_lambdas: lambda must be positive");
  const int C = static_cast<int>(classes.size());
  std::vector<Eigen::MatrixXd> projected;
  projected.reserve(classes.size());
  for (const auto& X : classes) {
    if (X.rows() != P0.cols()) throw InvalidInputError("adaptive_lambdas: dimension mismatch");
    projected.push_back(P0 * X);
  }
  Eigen::MatrixXd values(C, C);
  for (int c = 0; c < C; ++c) {
    for (int c2 = c; c2 < C; ++c2) {
      const CostMatrix M = c == c2 ? cost_matrix(projected[c])
                                   : cost_matrix(projected[c], projected[c2]);
      const double mean = M.entries.mean();
      if (!(mean > 0.0)) {
        throw DegenerateInputError("adaptive_lambdas: projected points of classes " +
                                   std::to_string(c) + " and " + std::to_string(c2) +
                                   " coincide");
      }
      values(c, c2) = values(c2, c) = lambda / mean;
    }
  }
  return PairLambdas(std::move(values));
}

CrossCovariance cross_covariance(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                 const TransportPlan& T, int source_class, int target_class) {
  if (X.rows() != Z.rows() || T.rows() != X.cols() || T.cols() != Z.cols()) {
    throw InvalidInputError("cross_covariance: shapes of samples and plan are inconsistent");
  }
  const Eigen::VectorXd row_mass = T.weights.rowwise().sum();
  const Eigen::VectorXd col_mass = T.weights.colwise().sum().transpose();
  const Eigen::MatrixXd cross = X * T.weights * Z.transpose();
  Eigen::MatrixXd C = X * row_mass.asDiagonal() * X.transpose() +
                      Z * col_mass.asDiagonal() * Z.transpose() - cross - cross.transpose();
  C = 0.5 * (C + C.transpose()).eval();
  return {std::move(C), source_class, target_class};
}

Eigen::MatrixXd pair_weights(std::span<const Eigen::MatrixXd> classes, bool class_weighting) {
  const auto C = static_cast<Eigen::Index>(classes.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(C, C);
  if (!class_weighting) return w;
  double total = 0.0;
  for (const auto& X : classes) total += static_cast<double>(X.cols());
  const double k = static_cast<double>(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    const double pc = static_cast<double>(classes[c].cols()) / total;
    for (Eigen::Index c2 = 0; c2 < C; ++c2) {
      const double pc2 = static_cast<double>(classes[c2].cols()) / total;
      w(c, c2) = c == c2 ? k * pc : k * k * pc * pc2;
    }
  }
  return w;
}

ObjectiveState evaluate(const Eigen::MatrixXd& P, std::span<const Eigen::MatrixXd> classes,
                        const PairLambdas& lambdas, const WdaConfig& cfg) {
  const int C = static_cast<int>(classes.size());
  if (C < 2) throw InvalidInputError("evaluate: at least two classes are required");
  if (lambdas.classes() != C) throw InvalidInputError("evaluate: lambda table does not match classes");
  const Eigen::Index d = P.cols();
  for (const auto& X : classes) {
    if (X.rows() != d) throw InvalidInputError("evaluate: class dimension does not match projection");
    if (X.cols() < 1) throw InvalidInputError("evaluate: empty class");
  }

  const Eigen::MatrixXd weights = pair_weights(classes, cfg.class_weighting);
  std::vector<Eigen::MatrixXd> projected;
  projected.reserve(classes.size());
  for (const auto& X : classes) projected.push_back(P * X);

  ObjectiveState state;
  state.lambdas = lambdas;
  state.between = Eigen::MatrixXd::Zero(d, d);
  state.within = Eigen::MatrixXd::Zero(d, d);
  for (int c = 0; c < C; ++c) {
    for (int c2 = c; c2 < C; ++c2) {
      PairState pair;
      pair.source = c;
      pair.target = c2;
      pair.lambda = lambdas(c, c2);
      pair.weight = weights(c, c2);
      pair.cost = c == c2 ? cost_matrix(projected[c]) : cost_matrix(projected[c], projected[c2]);
      pair.sinkhorn = sinkhorn_plan(pair.cost, pair.lambda, cfg.sinkhorn_iters, cfg.sinkhorn_tol);
      pair.distance = regularized_distance(pair.sinkhorn.plan, pair.cost);
      pair.covariance = cross_covariance(classes[c], classes[c2], pair.sinkhorn.plan, c, c2);
      (pair.intra() ? state.within : state.between) += pair.weight * pair.covariance.matrix;
      state.pairs.push_back(std::move(pair));
    }
  }

  const Eigen::MatrixXd gram = P.transpose() * P;
  state.sigma_b2 = gram.cwiseProduct(state.between).sum();
  state.sigma_w2 = gram.cwiseProduct(state.within).sum();
  if (!(state.sigma_w2 > 0.0)) {
    throw DegenerateInputError("evaluate: within-class dispersion is zero; the ratio is undefined");
  }
  state.value = state.sigma_b2 / state.sigma_w2;
  return state;
}

ObjectiveGradient gradient(const Eigen::MatrixXd& P, std::span<const Eigen::MatrixXd> classes,
                           const PairLambdas& lambdas, const WdaConfig& cfg) {
  ObjectiveGradient out;
  out.state = evaluate(P, classes, lambdas, cfg);
  const ObjectiveState& s = out.state;
  const double sw2 = s.sigma_w2;
  const double sb2 = s.sigma_b2;

  out.fixed_plan_term = P * ((2.0 / sw2) * s.between - (2.0 * sb2 / (sw2 * sw2)) * s.within);
  out.gradient = out.fixed_plan_term;
  for (const PairState& pair : s.pairs) {
    const double scale = pair.intra() ? -pair.weight * sb2 / (sw2 * sw2) : pair.weight / sw2;
    const KernelJacobian kjac =
        kernel_jacobian(P, classes[pair.source], classes[pair.target], pair.sinkhorn.trace);
    out.gradient += plan_jacobian_apply(pair.sinkhorn.trace, kjac, scale * pair.cost.entries);
  }
  return out;
}

nlohmann::json ObjectiveState::to_json() const {
  nlohmann::json pair_list = nlohmann::json::array();
  for (const auto& pair : pairs) {
    pair_list.push_back({{"source", pair.source},
                         {"target", pair.target},
                         {"lambda", pair.lambda},
                         {"weight", pair.weight},
                         {"distance", pair.distance},
                         {"marginal_residual", pair.sinkhorn.trace.residual}});
  }
  return {{"sigma_b2", sigma_b2},
          {"sigma_w2", sigma_w2},
          {"objective", value},
          {"pairs", pair_list},
          {"between", matrix_to_json(between)},
          {"within", matrix_to_json(within)}};
}

}  // namespace wda
