#pragma once

#include "wda/datasets.hpp"
#include "wda/stiefel.hpp"

#include <Eigen/Dense>

#include <span>

namespace wda {

/// Uniform-coupling cross-covariances: C^{c,c'} = (1/(n_c n_c')) sum_ij
/// (x_i - x'_j)(x_i - x'_j)^T, then C_b = sum_{c<c'} C^{c,c'}, C_w = sum_c C^{c,c}.
struct ScatterPair {
  Eigen::MatrixXd between;
  Eigen::MatrixXd within;
};
ScatterPair uniform_scatter(std::span<const Eigen::MatrixXd> classes);

/// <P^T P, C_b> / <P^T P, C_w>
double rayleigh_quotient(const Eigen::MatrixXd& P, const ScatterPair& scatter);

struct FdaModel {
  Eigen::MatrixXd eigenvectors;  // p x d, rows solve C_b w = mu C_w w, unit norm
  Eigen::VectorXd eigenvalues;   // descending
  ProjectionMatrix projection;   // orthonormal basis of the same row space
};

/// Ridge 1e-10 tr(C_w)/d is added to C_w before the generalized eigensolve.
FdaModel fda_fit(const LabeledDataset& data, int p);
FdaModel fda_fit(std::span<const Eigen::MatrixXd> classes, int p);

}  // namespace wda
