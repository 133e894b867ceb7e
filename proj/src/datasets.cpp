#include "wda/datasets.hpp"

#include "wda/errors.hpp"
#include "wda/ot_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace wda {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidInputError("Rng::below: bound must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

int LabeledDataset::num_classes() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<Eigen::Index> LabeledDataset::class_counts() const {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_classes()), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Eigen::MatrixXd LabeledDataset::class_block(int c) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Eigen::MatrixXd block(dim(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    block.col(static_cast<Eigen::Index>(k)) = samples.row(rows[k]).transpose();
  }
  return block;
}

std::vector<Eigen::MatrixXd> LabeledDataset::class_blocks() const {
  std::vector<Eigen::MatrixXd> blocks;
  for (int c = 0; c < num_classes(); ++c) blocks.push_back(class_block(c));
  return blocks;
}

void LabeledDataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw InvalidInputError("dataset: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(samples.rows()) + " samples");
  }
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != dim()) {
    throw InvalidInputError("dataset: feature name count does not match the dimension");
  }
  for (int y : labels) {
    if (y < 0) throw InvalidInputError("dataset: negative label " + std::to_string(y));
  }
  const auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw InvalidInputError("dataset: labels are not contiguous, class " + std::to_string(c) +
                              " is empty");
    }
  }
}

nlohmann::json ToyParams::to_json() const {
  return {{"radius", radius},
          {"mode_sigma", mode_sigma},
          {"noise_sigma", noise_sigma},
          {"noise_dims", noise_dims}};
}

LabeledDataset gen_toy(int n_per_class, std::uint64_t seed, const ToyParams& params) {
  const int sizes[3] = {n_per_class, n_per_class, n_per_class};
  return gen_toy(sizes, seed, params);
}

LabeledDataset gen_toy(std::span<const int> class_sizes, std::uint64_t seed,
                       const ToyParams& params) {
  if (class_sizes.size() != 3) throw InvalidInputError("gen_toy: exactly 3 class sizes expected");
  for (int s : class_sizes) {
    if (s < 2) throw InvalidInputError("gen_toy: every class needs at least 2 samples");
  }
  if (params.noise_dims < 0) throw InvalidInputError("gen_toy: noise_dims must be >= 0");

  Eigen::Index total = 0;
  for (int s : class_sizes) total += s;
  const Eigen::Index dim = 2 + params.noise_dims;

  LabeledDataset data;
  data.samples.resize(total, dim);
  data.labels.reserve(static_cast<std::size_t>(total));
  Rng rng(seed);
  Eigen::Index row = 0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < class_sizes[static_cast<std::size_t>(c)]; ++i, ++row) {
      const double angle = 2.0 * std::numbers::pi * c / 3.0 + (i % 2 == 0 ? 0.0 : std::numbers::pi);
      data.samples(row, 0) = params.radius * std::cos(angle) + params.mode_sigma * rng.normal();
      data.samples(row, 1) = params.radius * std::sin(angle) + params.mode_sigma * rng.normal();
      for (Eigen::Index k = 2; k < dim; ++k) data.samples(row, k) = params.noise_sigma * rng.normal();
      data.labels.push_back(c);
    }
  }
  return data;
}

LabeledDataset append_noise(const LabeledDataset& data, int noise_dims, std::uint64_t seed) {
  if (noise_dims < 0) throw InvalidInputError("append_noise: noise_dims must be >= 0");
  LabeledDataset out = data;
  if (noise_dims == 0) return out;
  const Eigen::Index d = data.dim();
  out.samples.conservativeResize(Eigen::NoChange, d + noise_dims);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    for (Eigen::Index k = d; k < d + noise_dims; ++k) out.samples(i, k) = rng.normal();
  }
  if (!out.feature_names.empty()) {
    for (int k = 0; k < noise_dims; ++k) out.feature_names.push_back("noise" + std::to_string(k));
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& data, std::span<const Eigen::Index> rows) {
  LabeledDataset out;
  out.feature_names = data.feature_names;
  out.samples.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.samples.row(static_cast<Eigen::Index>(k)) = data.samples.row(rows[k]);
    out.labels.push_back(data.labels[static_cast<std::size_t>(rows[k])]);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInputError("split: train fraction must lie in (0, 1)");
  }
  data.validate();
  Rng rng(seed);
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rows.size() < 2) {
      throw DegenerateInputError("split: class " + std::to_string(c) + " has fewer than 2 samples");
    }
    for (std::size_t i = rows.size() - 1; i > 0; --i) {
      std::swap(rows[i], rows[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    const auto n = static_cast<long>(rows.size());
    const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
    test_rows.insert(test_rows.end(), rows.begin() + n_train, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {subset(data, train_rows), subset(data, test_rows)};
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view cell, double& value) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

LabeledDataset parse_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t label_col = 0;
  std::size_t width = 0;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (width == 0) {
      double probe = 0.0;
      const bool is_header = std::any_of(cells.begin(), cells.end(),
                                         [&](std::string_view c) { return !parse_number(c, probe); });
      width = cells.size();
      if (width < 2) throw ParseError("csv: missing label column at line " + std::to_string(line_no), line_no, 1);
      label_col = width - 1;
      if (is_header) {
        for (auto c : cells) header.emplace_back(trim(c));
        const auto it = std::find(header.begin(), header.end(), "label");
        if (it != header.end()) label_col = static_cast<std::size_t>(it - header.begin());
        continue;
      }
    }
    if (cells.size() != width) {
      throw ParseError("csv: expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()) + " at line " + std::to_string(line_no),
                       line_no, std::min(cells.size(), width) + 1);
    }
    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t k = 0; k < width; ++k) {
      double value = 0.0;
      if (!parse_number(cells[k], value) || !std::isfinite(value)) {
        throw ParseError("csv: non-numeric cell '" + std::string(trim(cells[k])) + "' at line " +
                             std::to_string(line_no) + ", column " + std::to_string(k + 1),
                         line_no, k + 1);
      }
      if (k == label_col) {
        if (value != std::floor(value) || std::abs(value) > 1e9) {
          throw ParseError("csv: label '" + std::string(trim(cells[k])) + "' is not an integer at line " +
                               std::to_string(line_no) + ", column " + std::to_string(k + 1),
                           line_no, k + 1);
        }
        labels.push_back(static_cast<int>(value));
      } else {
        row.push_back(value);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("csv: no data rows", line_no, 0);

  LabeledDataset data;
  data.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      data.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  data.labels = std::move(labels);
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k != label_col) data.feature_names.push_back(header[k]);
  }
  data.validate();
  return data;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open " + path.string());
  return parse_csv(in);
}

void write_csv(const LabeledDataset& data, std::ostream& os) {
  for (Eigen::Index k = 0; k < data.dim(); ++k) {
    os << (data.feature_names.empty() ? "x" + std::to_string(k)
                                      : data.feature_names[static_cast<std::size_t>(k)])
       << ',';
  }
  os << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index k = 0; k < data.dim(); ++k) os << format_double(data.samples(i, k)) << ',';
    os << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

void save_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ostringstream os;
  write_csv(data, os);
  write_file_atomic(path, os.str());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw InvalidInputError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InvalidInputError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                            ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace wda
