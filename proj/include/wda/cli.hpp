#pragma once

#include "wda/datasets.hpp"
#include "wda/errors.hpp"
#include "wda/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace wda {

/// Bad flags, unreadable config files and config values that fail validation.
/// Maps to exit status 2; every other Error maps to 1.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Thrown by parse_args when --help was given; what() is the help text.
class HelpRequested : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;

  std::filesystem::path train;       // fit, evaluate
  std::filesystem::path test;        // evaluate
  std::filesystem::path data;        // transform, dump-transport, sweep ("toy" or a CSV)
  std::filesystem::path projection;  // transform, evaluate, dump-transport
  std::filesystem::path out;
  WdaConfig wda;
  std::uint64_t seed = 0;

  // generate
  std::vector<int> class_sizes{50, 50, 50};
  ToyParams toy;
  int extra_noise_dims = 0;

  // dump-transport
  bool pca_init = false;
  bool adaptive = true;

  // evaluate, sweep
  std::vector<int> ks{5};
  std::vector<int> dims{2};
  std::vector<double> lambdas{0.01};
  std::vector<std::string> methods{"wda"};
  int seeds = 20;
  double train_fraction = 0.5;
  std::vector<int> train_sizes{34, 33, 33};
  std::vector<int> test_sizes{334, 333, 333};
};

/// Parses argv into a RunConfig; throws ConfigError.
RunConfig parse_args(const std::vector<std::string>& args);

void cmd_generate(const RunConfig& rc);
void cmd_fit(const RunConfig& rc);
void cmd_transform(const RunConfig& rc);
void cmd_evaluate(const RunConfig& rc);
void cmd_sweep(const RunConfig& rc);
void cmd_dump_transport(const RunConfig& rc);

/// Parses and dispatches. Returns 0 on success, 1 on a module error, 2 on a
/// configuration error. Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace wda
