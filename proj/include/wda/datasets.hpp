#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wda {

/// Seeded generator whose output is fixed by this code, not by the standard
/// library implementation: mt19937_64 words, 53-bit uniforms, Box-Muller normals.
class Rng {
public:
  static constexpr const char* kAlgorithm = "mt19937_64/u53/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n x d samples, one row per sample, labels contiguous from 0.
struct LabeledDataset {
  Eigen::MatrixXd samples;
  std::vector<int> labels;
  std::vector<std::string> feature_names;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
  int num_classes() const;
  std::vector<Eigen::Index> class_counts() const;

  /// Samples of class c as a d x n_c matrix, in dataset order.
  Eigen::MatrixXd class_block(int c) const;
  std::vector<Eigen::MatrixXd> class_blocks() const;

  /// Throws InvalidInputError unless labels are contiguous and every class is populated.
  void validate() const;
};

struct ToyParams {
  double radius = 3.0;
  double mode_sigma = 0.5;
  double noise_sigma = 1.0;
  int noise_dims = 8;

  nlohmann::json to_json() const;
};

/// Three classes with two Gaussian modes each in the first two features,
/// unit Gaussian noise in the rest. Class c has modes at angles 2 pi c / 3
/// and 2 pi c / 3 + pi on a circle; samples alternate between the two modes.
LabeledDataset gen_toy(int n_per_class, std::uint64_t seed, const ToyParams& params = {});
LabeledDataset gen_toy(std::span<const int> class_sizes, std::uint64_t seed,
                       const ToyParams& params = {});

/// Unit-Gaussian nuisance columns appended after the existing features.
LabeledDataset append_noise(const LabeledDataset& data, int noise_dims, std::uint64_t seed);

/// Stratified split; each class contributes round(fraction * n_c) samples to
/// the training side, clamped so both sides keep at least one.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                double train_fraction, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& data, std::span<const Eigen::Index> rows);

/// Header row is optional. The label column is the one named "label", else the last.
LabeledDataset load_csv(const std::filesystem::path& path);
LabeledDataset parse_csv(std::istream& is);
void save_csv(const LabeledDataset& data, const std::filesystem::path& path);
void write_csv(const LabeledDataset& data, std::ostream& os);

/// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace wda
