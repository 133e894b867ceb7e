#include "wda/evaluation.hpp"

#include "wda/baselines.hpp"
#include "wda/errors.hpp"
#include "wda/ot_core.hpp"
#include "wda/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace wda {

std::vector<int> knn_predict(const Eigen::MatrixXd& train_x, std::span<const int> train_y,
                             const Eigen::MatrixXd& test_x, int k) {
  const Eigen::Index n = train_x.rows();
  if (n == 0) throw InvalidInputError("knn_predict: empty training set");
  if (static_cast<Eigen::Index>(train_y.size()) != n) {
    throw InvalidInputError("knn_predict: label count does not match training rows");
  }
  if (k < 1 || k > n) throw InvalidInputError("knn_predict: need 1 <= k <= n_train");
  if (test_x.cols() != train_x.cols()) throw InvalidInputError("knn_predict: feature dimensions differ");

  const int classes = *std::max_element(train_y.begin(), train_y.end()) + 1;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<int> votes(static_cast<std::size_t>(classes));
  std::vector<double> summed(static_cast<std::size_t>(classes));
  std::vector<int> predicted;
  predicted.reserve(static_cast<std::size_t>(test_x.rows()));

  for (Eigen::Index t = 0; t < test_x.rows(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = (train_x.row(i) - test_x.row(t)).squaredNorm();
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double da = dist[static_cast<std::size_t>(a)], db = dist[static_cast<std::size_t>(b)];
      return da < db || (da == db && a < b);
    });
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(summed.begin(), summed.end(), 0.0);
    for (int r = 0; r < k; ++r) {
      const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
      ++votes[static_cast<std::size_t>(train_y[idx])];
      summed[static_cast<std::size_t>(train_y[idx])] += std::sqrt(dist[idx]);
    }
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      const auto uc = static_cast<std::size_t>(c), ub = static_cast<std::size_t>(best);
      if (votes[uc] > votes[ub] || (votes[uc] == votes[ub] && summed[uc] < summed[ub])) best = c;
    }
    predicted.push_back(best);
  }
  return predicted;
}

double error_rate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw InvalidInputError("error_rate: length mismatch");
  if (truth.empty()) throw InvalidInputError("error_rate: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

std::string to_string(Method m) {
  switch (m) {
    case Method::wda: return "wda";
    case Method::pca: return "pca";
    case Method::fda: return "fda";
    case Method::identity: return "identity";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "wda") return Method::wda;
  if (name == "pca") return Method::pca;
  if (name == "fda") return Method::fda;
  if (name == "identity") return Method::identity;
  throw InvalidInputError("unknown method '" + name + "' (expected wda, pca, fda or identity)");
}

namespace {

// splitmix64 finalizer: decorrelates nearby seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index * 4 + stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> protocol_data(const DataSpec& spec, int seed_index) {
  const auto s = static_cast<std::uint64_t>(seed_index);
  std::pair<LabeledDataset, LabeledDataset> out;
  if (spec.kind == DataSpec::Kind::toy) {
    out.first = gen_toy(spec.train_class_sizes, mix_seed(spec.base_seed, s, 0), spec.toy);
    out.second = gen_toy(spec.test_class_sizes, mix_seed(spec.base_seed, s, 1), spec.toy);
  } else {
    out = split(load_csv(spec.path), spec.train_fraction, mix_seed(spec.base_seed, s, 0));
  }
  if (spec.extra_noise_dims > 0) {
    out.first = append_noise(out.first, spec.extra_noise_dims, mix_seed(spec.base_seed, s, 2));
    out.second = append_noise(out.second, spec.extra_noise_dims, mix_seed(spec.base_seed, s, 3));
  }
  return out;
}

const CellSummary* ExperimentResult::find(int k, int dim, double lambda) const {
  for (const auto& cell : summary) {
    if (cell.k == k && cell.dim == dim && cell.lambda == lambda) return &cell;
  }
  return nullptr;
}

void ExperimentResult::write_csv(std::ostream& os) const {
  os << "seed,k,p,lambda,method,error\n";
  for (const auto& r : records) {
    os << r.seed << ',' << r.k << ',' << r.dim << ',' << format_double(r.lambda) << ',' << r.method
       << ',' << (std::isnan(r.error) ? std::string("nan") : format_double(r.error)) << '\n';
  }
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : summary) {
    cells.push_back({{"k", c.k},
                     {"p", c.dim},
                     {"lambda", c.lambda},
                     {"method", c.method},
                     {"mean_error", c.completed > 0 ? nlohmann::json(c.mean) : nlohmann::json(nullptr)},
                     {"std_error", c.completed > 0 ? nlohmann::json(c.stddev) : nlohmann::json(nullptr)},
                     {"completed", c.completed},
                     {"failed", c.failed}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : records) {
    if (!r.failure.empty()) {
      failures.push_back({{"seed", r.seed}, {"k", r.k}, {"p", r.dim}, {"lambda", r.lambda},
                          {"message", r.failure}});
    }
  }
  return {{"cells", cells}, {"failures", failures}};
}

ExperimentResult run_protocol(const DataSpec& data, const MethodSpec& method, const Grid& grid,
                              int n_seeds) {
  if (n_seeds < 1) throw InvalidInputError("run_protocol: need at least one seed");
  if (grid.ks.empty() || grid.dims.empty() || grid.lambdas.empty()) {
    throw InvalidInputError("run_protocol: every grid axis needs at least one value");
  }
  for (int k : grid.ks) {
    if (k < 1) throw InvalidInputError("run_protocol: k values must be >= 1");
  }
  const std::string name = to_string(method.method);
  const bool uses_lambda = method.method == Method::wda;
  const std::vector<double> lambdas = uses_lambda ? grid.lambdas : std::vector<double>{0.0};

  ExperimentResult result;
  for (int s = 0; s < n_seeds; ++s) {
    const auto [train, test] = protocol_data(data, s);
    const std::vector<int> dims = method.method == Method::identity
                                      ? std::vector<int>{static_cast<int>(train.dim())}
                                      : grid.dims;
    for (int dim : dims) {
      for (double lambda : lambdas) {
        std::string failure;
        Eigen::MatrixXd train_z, test_z;
        try {
          switch (method.method) {
            case Method::identity:
              train_z = train.samples;
              test_z = test.samples;
              break;
            case Method::pca: {
              const auto P = pca_init(train, dim);
              train_z = P.apply(train.samples);
              test_z = P.apply(test.samples);
              break;
            }
            case Method::fda: {
              const auto model = fda_fit(train, dim);
              train_z = model.projection.apply(train.samples);
              test_z = model.projection.apply(test.samples);
              break;
            }
            case Method::wda: {
              WdaConfig cfg = method.config;
              cfg.dim = dim;
              cfg.lambda = lambda;
              const auto fit = wda_fit(train, cfg);
              train_z = fit.projection.apply(train.samples);
              test_z = fit.projection.apply(test.samples);
              break;
            }
          }
        } catch (const Error& e) {
          failure = e.what();
        }
        for (int k : grid.ks) {
          ExperimentRecord rec{s, k, dim, lambda, name, std::numeric_limits<double>::quiet_NaN(), failure};
          if (failure.empty()) {
            try {
              rec.error = error_rate(knn_predict(train_z, train.labels, test_z, k), test.labels);
            } catch (const Error& e) {
              rec.failure = e.what();
            }
          }
          result.records.push_back(std::move(rec));
        }
      }
    }
  }

  // Aggregate in a fixed order so summaries are reproducible.
  std::map<std::tuple<int, double, int>, std::vector<double>> errors;
  std::map<std::tuple<int, double, int>, int> failures;
  for (const auto& r : result.records) {
    const auto key = std::make_tuple(r.dim, r.lambda, r.k);
    if (r.failure.empty()) {
      errors[key].push_back(r.error);
    } else {
      ++failures[key];
      errors[key];
    }
  }
  for (const auto& [key, values] : errors) {
    CellSummary cell;
    std::tie(cell.dim, cell.lambda, cell.k) = key;
    cell.method = name;
    cell.completed = static_cast<int>(values.size());
    cell.failed = failures.count(key) ? failures.at(key) : 0;
    if (!values.empty()) {
      cell.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - cell.mean) * (v - cell.mean);
      cell.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    }
    result.summary.push_back(cell);
  }
  return result;
}

}  // namespace wda
