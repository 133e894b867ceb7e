#include "wda/cli.hpp"

#include "wda/evaluation.hpp"
#include "wda/ot_core.hpp"
#include "wda/stiefel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <utility>

namespace wda {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stages every file next to its destination and only renames once all of
// them are on disk.
class OutputBatch {
public:
  void add(fs::path path, std::string contents) {
    files_.emplace_back(std::move(path), std::move(contents));
  }

  void commit() {
    std::vector<fs::path> staged;
    const auto cleanup = [&] {
      std::error_code ec;
      for (const auto& t : staged) fs::remove(t, ec);
    };
    for (const auto& [path, contents] : files_) {
      fs::path tmp = path;
      tmp += ".tmp";
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) {
        cleanup();
        throw InvalidInputError("cannot write " + tmp.string());
      }
      staged.push_back(tmp);
      os << contents;
      os.close();
      if (!os) {
        cleanup();
        throw InvalidInputError("write failed for " + tmp.string());
      }
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      std::error_code ec;
      fs::rename(staged[i], files_[i].first, ec);
      if (ec) {
        cleanup();
        throw InvalidInputError("cannot rename " + staged[i].string() + ": " + ec.message());
      }
    }
  }

private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw InvalidInputError("cannot create output directory " + dir.string());
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_directory(file.parent_path());
}

void require(const fs::path& p, const char* flag, const std::string& command) {
  if (p.empty()) throw ConfigError(command + ": " + flag + " is required");
}

void validate_config(const WdaConfig& cfg, Eigen::Index input_dim = 0) {
  try {
    cfg.validate(input_dim);
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
}

std::string matrix_csv(const Eigen::MatrixXd& A) {
  std::ostringstream os;
  write_matrix_csv(os, A);
  return os.str();
}

std::string dataset_csv(const LabeledDataset& data) {
  std::ostringstream os;
  write_csv(data, os);
  return os.str();
}

ProjectionMatrix load_projection(const fs::path& path) {
  std::istringstream is(read_file(path));
  return ProjectionMatrix::from_orthonormal(read_matrix_csv(is), 1e-8);
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig rc;
  CLI::App app{"Wasserstein discriminant analysis", "wda"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(const WdaConfig&)>>> wda_flags;
  WdaConfig flagged;

  const auto add_wda_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config; flags override its values");
    const auto flag = [&](CLI::Option* opt, std::function<void(const WdaConfig&)> keep) {
      wda_flags.emplace_back(opt, std::move(keep));
    };
    flag(sub->add_option("--lambda", flagged.lambda, "entropic regularization (default 0.01)"),
         [&](const WdaConfig& f) { rc.wda.lambda = f.lambda; });
    flag(sub->add_option("--sinkhorn-iters", flagged.sinkhorn_iters, "Sinkhorn iterations (default 10)"),
         [&](const WdaConfig& f) { rc.wda.sinkhorn_iters = f.sinkhorn_iters; });
    flag(sub->add_option("--dim", flagged.dim, "projection dimension (default 2)"),
         [&](const WdaConfig& f) { rc.wda.dim = f.dim; });
    flag(sub->add_option("--max-iter", flagged.max_outer_iter, "outer iterations (default 100)"),
         [&](const WdaConfig& f) { rc.wda.max_outer_iter = f.max_outer_iter; });
    flag(sub->add_option("--tol", flagged.outer_tol, "relative objective tolerance (default 1e-6)"),
         [&](const WdaConfig& f) { rc.wda.outer_tol = f.outer_tol; });
    flag(sub->add_flag("--class-weighting", flagged.class_weighting, "weight pairs by class priors"),
         [&](const WdaConfig& f) { rc.wda.class_weighting = f.class_weighting; });
    flag(sub->add_option("--seed", flagged.seed, "seed for every random choice (default 0)"),
         [&](const WdaConfig& f) { rc.wda.seed = f.seed; });
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic three-class toy dataset");
  int n_per_class = 0;
  gen->add_option("--out", rc.out, "output CSV; a .json sidecar is written next to it")->required();
  gen->add_option("--n-per-class", n_per_class, "samples per class (default 50)");
  gen->add_option("--class-sizes", rc.class_sizes, "explicit per-class sample counts");
  gen->add_option("--radius", rc.toy.radius, "mode distance from the origin");
  gen->add_option("--mode-sigma", rc.toy.mode_sigma, "standard deviation within a mode");
  gen->add_option("--noise-sigma", rc.toy.noise_sigma, "standard deviation of nuisance features");
  gen->add_option("--noise-dims", rc.toy.noise_dims, "nuisance features (default 8)");
  gen->add_option("--seed", flagged.seed, "generator seed");
  auto* gen_seed = gen->get_option("--seed");

  auto* fit = app.add_subcommand("fit", "learn a projection from a labeled CSV");
  fit->add_option("--train", rc.train, "training CSV")->required();
  fit->add_option("--out", rc.out, "output directory")->required();
  add_wda_flags(fit);

  auto* transform = app.add_subcommand("transform", "project a labeled CSV");
  transform->add_option("--projection", rc.projection, "projection CSV (p x d)")->required();
  transform->add_option("--data", rc.data, "input CSV")->required();
  transform->add_option("--out", rc.out, "output CSV")->required();

  auto* evaluate = app.add_subcommand("evaluate", "k-NN test error, optionally after projecting");
  evaluate->add_option("--train", rc.train, "training CSV")->required();
  evaluate->add_option("--test", rc.test, "test CSV")->required();
  evaluate->add_option("--projection", rc.projection, "projection CSV");
  evaluate->add_option("--k", rc.ks, "neighbor counts (default 5)");
  evaluate->add_option("--out", rc.out, "output JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "repeated train/test experiments over a grid");
  sweep->add_option("--data", rc.data, "'toy' or a labeled CSV")->default_str("toy");
  sweep->add_option("--method", rc.methods, "wda, pca, fda, identity");
  sweep->add_option("--k", rc.ks, "neighbor counts");
  sweep->add_option("--dims", rc.dims, "projection dimensions");
  sweep->add_option("--lambdas", rc.lambdas, "regularization values");
  sweep->add_option("--seeds", rc.seeds, "number of data draws (default 20)");
  sweep->add_option("--train-fraction", rc.train_fraction, "CSV split fraction (default 0.5)");
  sweep->add_option("--train-sizes", rc.train_sizes, "toy training class sizes");
  sweep->add_option("--test-sizes", rc.test_sizes, "toy test class sizes");
  sweep->add_option("--noise-dims", rc.extra_noise_dims, "extra nuisance features to append");
  sweep->add_option("--out", rc.out, "output directory")->required();
  add_wda_flags(sweep);

  auto* dump = app.add_subcommand("dump-transport", "write every class-pair transport plan");
  dump->add_option("--data", rc.data, "labeled CSV")->required();
  dump->add_option("--projection", rc.projection, "projection CSV");
  dump->add_flag("--pca-init", rc.pca_init, "use the PCA projection of the data");
  dump->add_flag("!--no-adaptive", rc.adaptive, "use --lambda as is for every pair");
  dump->add_option("--out", rc.out, "output directory")->required();
  add_wda_flags(dump);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    throw HelpRequested(subs.empty() ? app.help() : subs.back()->help());
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  for (auto* sub : app.get_subcommands()) rc.subcommand = sub->get_name();

  if (!config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse config " + config_path + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + config_path + " must hold a JSON object");
    try {
      rc.wda = WdaConfig::from_json(j, rc.wda);
    } catch (const InvalidInputError& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& [opt, keep] : wda_flags) {
    if (opt->count() > 0) keep(flagged);
  }
  if (rc.subcommand == "generate") {
    if (gen_seed->count() > 0) rc.wda.seed = flagged.seed;
    if (n_per_class > 0) rc.class_sizes.assign(3, n_per_class);
  }
  rc.seed = rc.wda.seed;
  if (rc.subcommand == "sweep" && rc.data.empty()) rc.data = "toy";
  validate_config(rc.wda);
  return rc;
}

void cmd_generate(const RunConfig& rc) {
  if (rc.class_sizes.size() != 3) throw ConfigError("generate: --class-sizes takes three values");
  if (rc.extra_noise_dims < 0) throw ConfigError("generate: --noise-dims must be >= 0");
  LabeledDataset data = gen_toy(rc.class_sizes, rc.seed, rc.toy);
  json sidecar = {{"generator", "toy"},
                  {"seed", rc.seed},
                  {"rng", Rng::kAlgorithm},
                  {"class_sizes", rc.class_sizes},
                  {"params", rc.toy.to_json()},
                  {"rows", data.size()},
                  {"cols", data.dim()}};
  ensure_parent(rc.out);
  fs::path meta = rc.out;
  meta += ".json";
  OutputBatch batch;
  batch.add(rc.out, dataset_csv(data));
  batch.add(meta, sidecar.dump(2) + "\n");
  batch.commit();
}

void cmd_fit(const RunConfig& rc) {
  require(rc.train, "--train", "fit");
  const LabeledDataset data = load_csv(rc.train);
  validate_config(rc.wda, data.dim());
  const FitResult fit = wda_fit(data, rc.wda);

  json report = fit.report.to_json();
  report["train"] = {{"path", rc.train.string()}, {"samples", data.size()}, {"features", data.dim()}};
  report["orthonormality_error"] = fit.projection.orthonormality_error();

  ensure_directory(rc.out);
  OutputBatch batch;
  batch.add(rc.out / "projection.csv", matrix_csv(fit.projection.matrix()));
  batch.add(rc.out / "fit_report.json", report.dump(2) + "\n");
  batch.commit();
}

void cmd_transform(const RunConfig& rc) {
  const ProjectionMatrix P = load_projection(rc.projection);
  const LabeledDataset data = load_csv(rc.data);
  const LabeledDataset projected = P.apply(data);
  ensure_parent(rc.out);
  OutputBatch batch;
  batch.add(rc.out, dataset_csv(projected));
  batch.commit();
}

void cmd_evaluate(const RunConfig& rc) {
  LabeledDataset train = load_csv(rc.train);
  LabeledDataset test = load_csv(rc.test);
  if (!rc.projection.empty()) {
    const ProjectionMatrix P = load_projection(rc.projection);
    train = P.apply(train);
    test = P.apply(test);
  }
  json results = json::array();
  for (int k : rc.ks) {
    const double err = error_rate(knn_predict(train.samples, train.labels, test.samples, k), test.labels);
    results.push_back({{"k", k}, {"error", err}});
  }
  json out = {{"train", rc.train.string()},
              {"test", rc.test.string()},
              {"projection", rc.projection.empty() ? json(nullptr) : json(rc.projection.string())},
              {"features", train.dim()},
              {"results", results}};
  ensure_parent(rc.out);
  OutputBatch batch;
  batch.add(rc.out, out.dump(2) + "\n");
  batch.commit();
}

void cmd_sweep(const RunConfig& rc) {
  DataSpec spec;
  if (rc.data.empty() || rc.data == "toy") {
    spec.kind = DataSpec::Kind::toy;
    spec.train_class_sizes = rc.train_sizes;
    spec.test_class_sizes = rc.test_sizes;
    spec.toy = rc.toy;
  } else {
    spec.kind = DataSpec::Kind::csv;
    spec.path = rc.data;
    spec.train_fraction = rc.train_fraction;
  }
  spec.extra_noise_dims = rc.extra_noise_dims;
  spec.base_seed = rc.seed;

  Grid grid{rc.ks, rc.dims, rc.lambdas};
  for (double lambda : grid.lambdas) {
    WdaConfig probe = rc.wda;
    probe.lambda = lambda;
    validate_config(probe);
  }
  for (int dim : grid.dims) {
    WdaConfig probe = rc.wda;
    probe.dim = dim;
    validate_config(probe);
  }

  std::vector<Method> methods;
  for (const auto& name : rc.methods) {
    try {
      methods.push_back(method_from_string(name));
    } catch (const InvalidInputError& e) {
      throw ConfigError(e.what());
    }
  }

  ExperimentResult merged;
  for (Method m : methods) {
    ExperimentResult r = run_protocol(spec, MethodSpec{m, rc.wda}, grid, rc.seeds);
    merged.records.insert(merged.records.end(), r.records.begin(), r.records.end());
    merged.summary.insert(merged.summary.end(), r.summary.begin(), r.summary.end());
  }

  std::ostringstream csv;
  merged.write_csv(csv);
  json summary = merged.to_json();
  summary["seeds"] = rc.seeds;
  summary["base_seed"] = rc.seed;
  summary["data"] = rc.data.empty() ? std::string("toy") : rc.data.string();
  summary["config"] = rc.wda.to_json();

  ensure_directory(rc.out);
  OutputBatch batch;
  batch.add(rc.out / "results.csv", csv.str());
  batch.add(rc.out / "summary.json", summary.dump(2) + "\n");
  batch.commit();
}

void cmd_dump_transport(const RunConfig& rc) {
  if (rc.projection.empty() == !rc.pca_init) {
    throw ConfigError("dump-transport: give exactly one of --projection and --pca-init");
  }
  const LabeledDataset data = load_csv(rc.data);
  const std::vector<Eigen::MatrixXd> classes = data.class_blocks();
  const int C = static_cast<int>(classes.size());

  ProjectionMatrix P;
  if (rc.pca_init) {
    validate_config(rc.wda, data.dim());
    P = pca_init(data, rc.wda.dim);
  } else {
    P = load_projection(rc.projection);
    if (P.input_dim() != data.dim()) {
      throw InvalidInputError("dump-transport: projection expects " + std::to_string(P.input_dim()) +
                              " features, data has " + std::to_string(data.dim()));
    }
  }

  PairLambdas lambdas = PairLambdas::constant(C, rc.wda.lambda);
  if (rc.adaptive) {
    WdaConfig at_init = rc.wda;
    at_init.dim = static_cast<int>(P.dim());
    validate_config(at_init, data.dim());
    lambdas = adaptive_lambdas(pca_init(data, at_init.dim).matrix(), classes, rc.wda.lambda);
  }

  std::vector<Eigen::MatrixXd> projected;
  for (const auto& X : classes) projected.push_back(P.matrix() * X);

  ensure_directory(rc.out);
  OutputBatch batch;
  json pairs = json::array();
  for (int c = 0; c < C; ++c) {
    for (int c2 = c; c2 < C; ++c2) {
      const CostMatrix M = c == c2 ? cost_matrix(projected[c]) : cost_matrix(projected[c], projected[c2]);
      const SinkhornResult r = sinkhorn_plan(M, lambdas(c, c2), rc.wda.sinkhorn_iters, rc.wda.sinkhorn_tol);
      const std::string name = "plan_" + std::to_string(c) + "_" + std::to_string(c2) + ".csv";
      batch.add(rc.out / name, matrix_csv(r.plan.weights));
      pairs.push_back({{"source", c},
                       {"target", c2},
                       {"file", name},
                       {"rows", r.plan.weights.rows()},
                       {"cols", r.plan.weights.cols()},
                       {"lambda", lambdas(c, c2)},
                       {"distance", regularized_distance(r.plan, M)},
                       {"marginal_residual", r.trace.residual},
                       {"converged_at", r.trace.converged_at}});
    }
  }
  json index = {{"data", rc.data.string()},
                {"projection", rc.pca_init ? std::string("pca") : rc.projection.string()},
                {"lambda", rc.wda.lambda},
                {"adaptive", rc.adaptive},
                {"sinkhorn_iters", rc.wda.sinkhorn_iters},
                {"pairs", pairs}};
  batch.add(rc.out / "index.json", index.dump(2) + "\n");
  batch.commit();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig rc = parse_args(args);
    if (rc.subcommand == "generate") cmd_generate(rc);
    else if (rc.subcommand == "fit") cmd_fit(rc);
    else if (rc.subcommand == "transform") cmd_transform(rc);
    else if (rc.subcommand == "evaluate") cmd_evaluate(rc);
    else if (rc.subcommand == "sweep") cmd_sweep(rc);
    else if (rc.subcommand == "dump-transport") cmd_dump_transport(rc);
    return 0;
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const ConfigError& e) {
    err << "wda: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "wda: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "wda: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace wda
