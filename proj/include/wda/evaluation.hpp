#pragma once

#include "wda/datasets.hpp"
#include "wda/objective.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wda {

/// Majority vote over the k Euclidean-nearest training rows. Neighbors at equal
/// distance are ranked by training index. Vote ties go to the label with the
/// smallest summed neighbor distance, then to the smallest label.
std::vector<int> knn_predict(const Eigen::MatrixXd& train_x, std::span<const int> train_y,
                             const Eigen::MatrixXd& test_x, int k);

double error_rate(std::span<const int> predicted, std::span<const int> truth);

enum class Method { wda, pca, fda, identity };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct DataSpec {
  enum class Kind { toy, csv };
  Kind kind = Kind::toy;

  // toy: fresh train and test draws per seed
  std::vector<int> train_class_sizes{34, 33, 33};
  std::vector<int> test_class_sizes{334, 333, 333};
  ToyParams toy;

  // csv: stratified split of a fixed file per seed
  std::filesystem::path path;
  double train_fraction = 0.5;

  int extra_noise_dims = 0;
  std::uint64_t base_seed = 0;
};

struct MethodSpec {
  Method method = Method::wda;
  WdaConfig config;  // dim and lambda are overridden by the grid
};

struct Grid {
  std::vector<int> ks{5};
  std::vector<int> dims{2};
  std::vector<double> lambdas{0.01};
};

struct ExperimentRecord {
  int seed = 0;
  int k = 0;
  int dim = 0;
  double lambda = 0.0;
  std::string method;
  double error = 0.0;  // NaN when the cell failed
  std::string failure;
};

struct CellSummary {
  int k = 0;
  int dim = 0;
  double lambda = 0.0;
  std::string method;
  double mean = 0.0;
  double stddev = 0.0;
  int completed = 0;
  int failed = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;  // seed-major, then dim, lambda, k
  std::vector<CellSummary> summary;       // dim, lambda, k order

  const CellSummary* find(int k, int dim, double lambda) const;

  /// Long format: seed,k,p,lambda,method,error
  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

/// The train/test pair used for one seed of the protocol.
std::pair<LabeledDataset, LabeledDataset> protocol_data(const DataSpec& spec, int seed_index);

/// Per seed: draw data, fit the method for every (dim, lambda), project train
/// and test, score KNN for every k. Failed fits are recorded, not thrown.
ExperimentResult run_protocol(const DataSpec& data, const MethodSpec& method, const Grid& grid,
                              int n_seeds);

}  // namespace wda
