#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "covevo/datasets.hpp"
#include "covevo/error.hpp"
#include "covevo/evolution.hpp"
#include "covevo/gp.hpp"
#include "covevo/hyperopt.hpp"
#include "covevo/result_record.hpp"
#include "covevo/run_config.hpp"

namespace covevo::cli {

namespace {

namespace fs = std::filesystem;

// Bad input from the user: reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

int default_workers() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::ofstream open_output(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

struct DataSource {
  std::string path;
  std::string format = "auto";
  std::string target;
  std::string synthetic;
  std::uint64_t data_seed = 1;
  bool desk = false;

  void add_to(CLI::App* app, bool allow_synthetic) {
    auto* d = app->add_option("--data", path, "Input data (CSV or NOAA monthly text)")
                  ->check(CLI::ExistingFile);
    app->add_option("--format", format, "auto, csv or noaa")->check(CLI::IsMember({"auto", "csv", "noaa"}));
    app->add_option("--target", target, "Target column of a CSV file (default: last)");
    if (allow_synthetic) {
      auto* s = app->add_option("--synthetic", synthetic, "Synthetic dataset: SE+RQ, SE+Matern, SE+Periodic");
      app->add_option("--data-seed", data_seed, "Seed of the synthetic sample");
      app->add_flag("--desk", desk, "Use the 441-point subgrid of the synthetic grid");
      d->excludes(s);
    }
  }

  Dataset load() const {
    if (!synthetic.empty()) {
      auto kind = parse_synthetic_name(synthetic);
      if (!kind) throw UsageError("unknown synthetic dataset '" + synthetic + "'");
      Dataset d = make_synthetic(*kind, data_seed);
      return desk ? desk_subgrid(d) : d;
    }
    if (path.empty()) throw UsageError("no data given (use --data or --synthetic)");
    if (desk) throw UsageError("--desk applies to synthetic data only");
    auto f = parse_data_format(format);
    std::optional<std::string> t;
    if (!target.empty()) t = target;
    return load_dataset(path, *f, t);
  }
};

void write_plot_csv(const GpModel& model, const Dataset& data, bool with_noise,
                    const std::string& path) {
  PredictOptions po;
  po.include_noise = with_noise;
  Prediction p = predict(model, data.X, po);
  std::vector<const char*> split(static_cast<std::size_t>(data.size()), "none");
  for (int i : data.train) split[i] = "train";
  for (int i : data.test) split[i] = "test";
  auto out = open_output(path);
  for (const auto& c : data.columns) out << c << ',';
  out << "actual,mean,variance,lower,upper,split\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.X.cols(); ++c) out << data.X(r, c) << ',';
    const double sd = std::sqrt(p.variance[r]);
    out << data.y[r] << ',' << p.mean[r] << ',' << p.variance[r] << ',' << p.mean[r] - 2 * sd << ','
        << p.mean[r] + 2 * sd << ',' << split[r] << '\n';
  }
}

void write_history_csv(const RunReport& report, const std::string& path) {
  auto out = open_output(path);
  out << "generation,evaluations,best_nll,median_nll,selection_pressure\n";
  for (const auto& g : report.generations)
    out << g.generation << ',' << g.evaluations << ',' << g.best << ',' << g.median << ','
        << g.selection_pressure << '\n';
}

void write_evaluation_log(const RunReport& report, const std::string& path) {
  auto out = open_output(path);
  out << "index,generation,kernel,length,height,params,fitness,is_child,parent_a,parent_b,accepted\n";
  for (const auto& e : report.log) {
    out << e.index << ',' << e.generation << ",\"" << e.expr << "\"," << e.metrics.length << ','
        << e.metrics.height << ',' << e.metrics.param_count << ',' << e.fitness << ','
        << e.is_child << ',' << e.parent_a_fitness << ',' << e.parent_b_fitness << ','
        << e.accepted << '\n';
  }
}

// Config echo as a JSON object. The worker count is left out because it
// never changes results.
nlohmann::json config_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(format_run_config(config));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    auto eq = line.find(" = ");
    std::string key = line.substr(0, eq);
    if (key == "evolution.workers") continue;
    j[key] = line.substr(eq + 3);
  }
  return j;
}

// Runs the configured search and writes result.json, history.csv,
// evaluations.csv and plot.csv into the output directory.
ResultRecord run_search(const RunConfig& config, const Dataset& data, std::ostream& out) {
  RunReport report = config.mode == SearchMode::Evolve
                         ? evolve(data, config.evolution)
                         : random_search(data, config.evolution, config.budget);
  if (!report.best || !report.best->opt) throw NumericalError("no candidate could be evaluated");
  Individual best = config.refit ? refit(*report.best, data, config.evolution) : *report.best;

  ResultRecord record = make_record(best.expr, best.opt->theta, data);
  record.command = config.mode == SearchMode::Evolve ? "evolve" : "random-search";
  record.evaluations = report.total_evaluations;
  record.seed = config.evolution.seed;
  record.config = config_json(config);
  if (config.mode == SearchMode::Evolve) record.initial = report.initial;
  record.history = report.generations;
  record.stop_reason = report.stop_reason;
  record.wall_seconds = report.wall_seconds;

  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  save_record(record, (dir / "result.json").string());
  write_history_csv(report, (dir / "history.csv").string());
  write_evaluation_log(report, (dir / "evaluations.csv").string());
  write_plot_csv(record_model(record, data), data, config.with_noise, (dir / "plot.csv").string());

  out << "best " << record.kernel << '\n'
      << "train_nll " << std::setprecision(10) << record.train_nll << '\n'
      << "evaluations " << record.evaluations << '\n';
  if (record.test_pearson) out << "test_pearson " << *record.test_pearson << '\n';
  out << "stop " << record.stop_reason << '\n';
  return record;
}

int cmd_synth(const std::string& name, std::uint64_t seed, bool desk, const std::string& path,
              std::ostream& out) {
  auto kind = parse_synthetic_name(name);
  if (!kind) throw UsageError("unknown synthetic dataset '" + name + "' (SE+RQ, SE+Matern, SE+Periodic)");
  Dataset d = make_synthetic(*kind, seed);
  if (desk) d = desk_subgrid(d);
  auto f = open_output(path);
  write_csv(d, f);
  out << "wrote " << d.size() << " rows to " << path << '\n';
  return kExitOk;
}

struct FitArgs {
  DataSource data;
  std::string kernel;
  int restarts = 10;
  int iterations = 50;
  std::uint64_t seed = 1;
  std::string out = "result.json";
  std::string plot;
  bool with_noise = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  Dataset data = a.data.load();
  KernelExpr expr = parse_expr(a.kernel, data.dim(), ExprLimits{1 << 20, 1 << 20});
  Ml2Options opt;
  opt.restarts = a.restarts;
  opt.iterations = a.iterations;
  opt.seed = a.seed;
  OptResult res = ml2_fit(expr, data, opt);
  ResultRecord record = make_record(expr, res.theta, data);
  record.command = "fit";
  record.evaluations = 1;
  record.seed = a.seed;
  record.config = {{"restarts", a.restarts}, {"iterations", a.iterations}};
  save_record(record, a.out);
  if (!a.plot.empty()) write_plot_csv(record_model(record, data), data, a.with_noise, a.plot);
  out << "kernel " << record.kernel << '\n' << "train_nll " << std::setprecision(10) << record.train_nll << '\n';
  if (record.test_pearson)
    out << "test_rmse " << *record.test_rmse << '\n' << "test_pearson " << *record.test_pearson << '\n';
  return kExitOk;
}

struct EvolveArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

int cmd_evolve(const EvolveArgs& a, std::ostream& out) {
  RunConfig config;
  try {
    config = load_run_config(a.config);
  } catch (const Error& e) {
    throw UsageError(a.config + ": " + e.what());
  }
  if (a.seed) config.evolution.seed = *a.seed;
  if (!a.out.empty()) config.out_dir = a.out;
  config.evolution.workers = a.workers.value_or(default_workers());
  config.validate();
  Dataset data = load_run_dataset(config);
  run_search(config, data, out);
  return kExitOk;
}

struct BaselineArgs {
  DataSource data;
  std::string mode = "kernels";
  long budget = 800;
  std::uint64_t seed = 1;
  int restarts = 10;
  int iterations = 50;
  std::string out;
  std::optional<int> workers;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  Dataset data = a.data.load();
  if (a.mode == "kernels") {
    auto rows = baseline_suite(data, a.seed, a.restarts, a.iterations);
    std::ostringstream table;
    table << std::setprecision(17) << "name,kernel,nll\n";
    for (const auto& r : rows) table << r.name << ",\"" << r.kernel << "\"," << r.nll << '\n';
    if (!a.out.empty()) open_output(a.out) << table.str();
    out << table.str();
    return kExitOk;
  }
  RunConfig config;
  config.mode = SearchMode::Random;
  config.budget = a.budget;
  config.evolution.seed = a.seed;
  config.evolution.workers = a.workers.value_or(default_workers());
  config.out_dir = a.out.empty() ? "." : a.out;
  config.data_path = a.data.path;
  if (!a.data.synthetic.empty()) {
    config.synthetic = parse_synthetic_name(a.data.synthetic);
    config.data_seed = a.data.data_seed;
    config.desk_scale = a.data.desk;
  }
  if (auto f = parse_data_format(a.data.format)) config.data_format = *f;
  if (!a.data.target.empty()) config.data_target = a.data.target;
  config.validate();
  run_search(config, data, out);
  return kExitOk;
}

struct PredictArgs {
  std::string record;
  DataSource data;
  std::string out = "predictions.csv";
  bool with_noise = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  ResultRecord record;
  try {
    record = load_record(a.record);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Dataset data = a.data.load();
  write_plot_csv(record_model(record, data), data, a.with_noise, a.out);
  out << "wrote " << data.size() << " predictions to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolve Gaussian-process covariance functions with grammar-guided genetic programming"};
  app.name("covevo");
  app.require_subcommand(1);

  std::string synth_name;
  std::uint64_t synth_seed = 1;
  bool synth_desk = false;
  std::string synth_out = "synthetic.csv";
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as CSV");
  synth->add_option("--name", synth_name, "SE+RQ, SE+Matern or SE+Periodic")->required();
  synth->add_option("--seed", synth_seed, "Sample seed");
  synth->add_flag("--desk", synth_desk, "Write the 441-point subgrid");
  synth->add_option("--out", synth_out, "Output CSV");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one kernel by ML-II and write a result record");
  fit_args.data.add_to(fit_cmd, true);
  fit_cmd->add_option("--kernel", fit_args.kernel, "Kernel expression, e.g. \"(Sum SE Periodic)\"")->required();
  fit_cmd->add_option("--restarts", fit_args.restarts, "Random restarts")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--iterations", fit_args.iterations, "L-BFGS iterations per restart")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--seed", fit_args.seed, "Restart seed");
  fit_cmd->add_option("--out", fit_args.out, "Result record (JSON)");
  fit_cmd->add_option("--plot", fit_args.plot, "Also write plot data CSV");
  fit_cmd->add_flag("--with-noise", fit_args.with_noise, "Band for noisy observations");
  int fit_workers = 1;
  fit_cmd->add_option("--workers", fit_workers, "Accepted for symmetry; fitting is sequential");

  EvolveArgs evolve_args;
  auto* evolve_cmd = app.add_subcommand("evolve", "Run a search described by a config file");
  evolve_cmd->add_option("--config", evolve_args.config, "Run config")->required()->check(CLI::ExistingFile);
  evolve_cmd->add_option("--seed", evolve_args.seed, "Override evolution.seed");
  evolve_cmd->add_option("--out", evolve_args.out, "Override output.dir");
  evolve_cmd->add_option("--workers", evolve_args.workers, "Concurrent evaluations")->check(CLI::PositiveNumber);

  BaselineArgs base_args;
  auto* base_cmd = app.add_subcommand("baseline", "Single-kernel baselines or random search");
  base_args.data.add_to(base_cmd, true);
  base_cmd->add_option("--mode", base_args.mode, "kernels or random-search")
      ->check(CLI::IsMember({"kernels", "random-search"}));
  base_cmd->add_option("--budget", base_args.budget, "Random-search evaluations")->check(CLI::PositiveNumber);
  base_cmd->add_option("--seed", base_args.seed, "Seed");
  base_cmd->add_option("--restarts", base_args.restarts, "Restarts per baseline kernel")
      ->check(CLI::PositiveNumber);
  base_cmd->add_option("--iterations", base_args.iterations, "L-BFGS iterations per restart")
      ->check(CLI::NonNegativeNumber);
  base_cmd->add_option("--out", base_args.out, "Table CSV (kernels) or output directory (random-search)");
  base_cmd->add_option("--workers", base_args.workers, "Concurrent evaluations")->check(CLI::PositiveNumber);

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "Predict with a stored result record");
  pred_cmd->add_option("--record", pred_args.record, "Result record (JSON)")->required()->check(CLI::ExistingFile);
  pred_args.data.add_to(pred_cmd, true);
  pred_cmd->add_option("--out", pred_args.out, "Output CSV");
  pred_cmd->add_flag("--with-noise", pred_args.with_noise, "Variance of noisy observations");
  int pred_workers = 1;
  pred_cmd->add_option("--workers", pred_workers, "Accepted for symmetry; prediction is sequential");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_name, synth_seed, synth_desk, synth_out, out);
    if (*fit_cmd) return cmd_fit(fit_args, out);
    if (*evolve_cmd) return cmd_evolve(evolve_args, out);
    if (*base_cmd) return cmd_baseline(base_args, out);
    if (*pred_cmd) return cmd_predict(pred_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: invalid kernel: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MaskLengthError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace covevo::cli
