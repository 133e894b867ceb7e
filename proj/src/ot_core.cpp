#include "wda/ot_core.hpp"

#include "wda/errors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace wda {

double TransportPlan::marginal_residual() const {
  const double n = static_cast<double>(weights.rows());
  const double m = static_cast<double>(weights.cols());
  const double row = (weights.rowwise().sum().array() - 1.0 / n).abs().maxCoeff();
  const double col = (weights.colwise().sum().array() - 1.0 / m).abs().maxCoeff();
  return std::max(row, col);
}

CostMatrix cost_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  if (X.rows() != Z.rows()) {
    throw InvalidInputError("cost_matrix: feature dimensions differ (" +
                            std::to_string(X.rows()) + " vs " + std::to_string(Z.rows()) + ")");
  }
  if (X.rows() < 1) throw InvalidInputError("cost_matrix: feature dimension must be >= 1");
  if (&X == &Z) return cost_matrix(X);

  CostMatrix M{Eigen::MatrixXd(X.cols(), Z.cols())};
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      M.entries(i, j) = (X.col(i) - Z.col(j)).squaredNorm();
    }
  }
  return M;
}

CostMatrix cost_matrix(const Eigen::MatrixXd& X) {
  if (X.rows() < 1) throw InvalidInputError("cost_matrix: feature dimension must be >= 1");
  const Eigen::Index n = X.cols();
  CostMatrix M{Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dist = (X.col(i) - X.col(j)).squaredNorm();
      M.entries(i, j) = dist;
      M.entries(j, i) = dist;
    }
  }
  return M;
}

SinkhornResult sinkhorn_plan(const CostMatrix& M, double lambda, int iterations, double tol) {
  if (!(lambda > 0.0)) throw InvalidInputError("sinkhorn_plan: lambda must be positive");
  if (iterations < 1) throw InvalidInputError("sinkhorn_plan: iteration count must be >= 1");
  if (M.rows() < 1 || M.cols() < 1) throw InvalidInputError("sinkhorn_plan: empty cost matrix");
  if (!M.entries.allFinite()) throw InvalidInputError("sinkhorn_plan: cost matrix is not finite");

  const Eigen::Index n = M.rows();
  const Eigen::Index m = M.cols();
  const double scaled_max = lambda * M.entries.maxCoeff();

  SinkhornResult out;
  SinkhornTrace& tr = out.trace;
  tr.lambda = lambda;
  tr.iterations = iterations;
  tr.kernel = (-lambda * M.entries.array()).exp().matrix();

  const auto underflows = [](const auto& block) { return (block.array() < kScalingFloor).all(); };
  for (Eigen::Index i = 0; i < n; ++i) {
    if (underflows(tr.kernel.row(i))) {
      throw NumericalRangeError("sinkhorn_plan: kernel row " + std::to_string(i) +
                                    " underflows; lambda*max(M) = " + format_double(scaled_max),
                                scaled_max);
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    if (underflows(tr.kernel.col(j))) {
      throw NumericalRangeError("sinkhorn_plan: kernel column " + std::to_string(j) +
                                    " underflows; lambda*max(M) = " + format_double(scaled_max),
                                scaled_max);
    }
  }

  const double row_mass = 1.0 / static_cast<double>(n);
  const double col_mass = 1.0 / static_cast<double>(m);
  tr.u.resize(n, iterations + 1);
  tr.v.resize(m, iterations + 1);
  tr.u.col(0).setOnes();
  tr.v.col(0).setZero();

  const Eigen::MatrixXd& K = tr.kernel;
  for (int k = 1; k <= iterations; ++k) {
    const Eigen::VectorXd kt_u = (K.transpose() * tr.u.col(k - 1)).cwiseMax(kScalingFloor);
    tr.v.col(k) = col_mass * kt_u.cwiseInverse();
    const Eigen::VectorXd k_v = (K * tr.v.col(k)).cwiseMax(kScalingFloor);
    tr.u.col(k) = row_mass * k_v.cwiseInverse();

    // Rows are exact after the u update; the column marginal carries the error.
    const Eigen::VectorXd col_sums =
        tr.v.col(k).cwiseProduct(K.transpose() * tr.u.col(k));
    const double residual = (col_sums.array() - col_mass).abs().maxCoeff();
    if (tr.converged_at < 0 && residual < tol) tr.converged_at = k;
  }

  out.plan.weights = tr.u.col(iterations).asDiagonal() * K * tr.v.col(iterations).asDiagonal();
  if (!out.plan.weights.allFinite()) {
    throw NumericalRangeError("sinkhorn_plan: non-finite plan; lambda*max(M) = " +
                                  format_double(scaled_max),
                              scaled_max);
  }
  tr.residual = out.plan.marginal_residual();
  return out;
}

double regularized_distance(const TransportPlan& T, const CostMatrix& M) {
  if (T.rows() != M.rows() || T.cols() != M.cols()) {
    throw InvalidInputError("regularized_distance: plan and cost shapes differ");
  }
  return T.weights.cwiseProduct(M.entries).sum();
}

double entropic_objective(const TransportPlan& T, const CostMatrix& M, double lambda) {
  double entropy = 0.0;
  for (Eigen::Index j = 0; j < T.cols(); ++j) {
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
      const double t = T.weights(i, j);
      if (t > 0.0) entropy -= t * std::log(t);
    }
  }
  return lambda * regularized_distance(T, M) - entropy;
}

std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(A(i, j));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t column = 1;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start);
      double value = 0.0;
      const auto first = cell.data();
      const auto last = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last || cell.empty()) {
        throw ParseError("matrix csv: non-numeric cell '" + std::string(cell) + "' at line " +
                             std::to_string(line_no) + ", column " + std::to_string(column),
                         line_no, column);
      }
      row.push_back(value);
      if (comma == std::string::npos) break;
      start = comma + 1;
      ++column;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("matrix csv: ragged row at line " + std::to_string(line_no), line_no,
                       row.size());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd A(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) A(i, j) = rows[i][j];
  }
  return A;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& A) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(A.size()));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) flat.push_back(A(i, j));
  }
  return {{"rows", A.rows()}, {"cols", A.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw InvalidInputError("matrix json: data length does not match shape");
  }
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) A(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
  }
  return A;
}

}  // namespace wda
