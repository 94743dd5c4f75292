#include "covevo/result_record.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "covevo/error.hpp"

namespace covevo {

using nlohmann::json;

namespace {

// JSON has no infinity; failed fitness values are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) throw DimensionError("rmse needs equal, non-empty vectors");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw DimensionError("pearson needs equal, non-empty vectors");
  Eigen::VectorXd da = a.array() - a.mean();
  Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return da.dot(db) / denom;
}

ResultRecord make_record(const KernelExpr& expr, const Eigen::VectorXd& theta,
                         const Dataset& data) {
  ResultRecord r;
  r.kernel = format_expr(expr);
  r.dim = data.dim();
  r.theta = theta;
  ParamLayout layout(expr);
  if (theta.size() != layout.size()) throw DimensionError("theta does not match the kernel");
  auto names = layout.qualified_names();
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    r.hyperparameters.push_back({names[static_cast<std::size_t>(i)], theta[i], std::exp(theta[i])});

  GpModel model = fit(expr, theta, data.train_X(), data.train_y());
  r.train_nll = model.nll;
  r.mean_const = model.mean_const;
  r.train_count = static_cast<long>(data.train.size());
  r.test_count = static_cast<long>(data.test.size());
  r.data = data.provenance;
  if (!data.test.empty()) {
    Prediction p = predict(model, data.test_X());
    Eigen::VectorXd yt = data.test_y();
    r.test_rmse = rmse(p.mean, yt);
    r.test_pearson = pearson(p.mean, yt);
  }
  return r;
}

GpModel record_model(const ResultRecord& record, const Dataset& data) {
  if (data.dim() != record.dim) throw DimensionError("dataset dimension does not match the record");
  KernelExpr expr = parse_expr(record.kernel, record.dim, ExprLimits{1 << 20, 1 << 20});
  return fit(expr, record.theta, data.train_X(), data.train_y());
}

json to_json(const GenerationRecord& g) {
  return json{{"generation", g.generation},
              {"best_nll", number(g.best)},
              {"median_nll", number(g.median)},
              {"worst_nll", number(g.worst)},
              {"children", g.children},
              {"accepted", g.accepted},
              {"evaluations", g.evaluations},
              {"selection_pressure", g.selection_pressure}};
}

GenerationRecord generation_from_json(const json& j) {
  GenerationRecord g;
  g.generation = j.at("generation").get<int>();
  g.best = number_or(j.at("best_nll"), kInf);
  g.median = number_or(j.at("median_nll"), kInf);
  g.worst = number_or(j.at("worst_nll"), kInf);
  g.children = j.at("children").get<long>();
  g.accepted = j.at("accepted").get<long>();
  g.evaluations = j.at("evaluations").get<long>();
  g.selection_pressure = j.at("selection_pressure").get<double>();
  return g;
}

json to_json(const EvolutionConfig& c) {
  return json{{"population_size", c.population_size},
              {"max_generations", c.max_generations},
              {"mutation_rate", c.mutation_rate},
              {"max_length", c.limits.max_length},
              {"max_height", c.limits.max_height},
              {"ml2_iterations", c.ml2_iterations},
              {"restarts", c.restarts},
              {"final_restarts", c.final_restarts},
              {"success_ratio", c.success_ratio},
              {"comparison_factor", c.comparison_factor},
              {"max_selection_pressure", c.max_selection_pressure},
              {"max_evaluations", c.max_evaluations},
              {"seed", c.seed}};
}

json to_json(const ResultRecord& r) {
  json params = json::array();
  for (const auto& p : r.hyperparameters)
    params.push_back({{"name", p.name}, {"log_value", p.log_value}, {"value", p.value}});
  json history = json::array();
  for (const auto& g : r.history) history.push_back(to_json(g));
  return json{{"version", kRecordVersion},
              {"command", r.command},
              {"kernel", r.kernel},
              {"dim", r.dim},
              {"hyperparameters", params},
              {"theta", std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size())},
              {"train_nll", r.train_nll},
              {"mean_const", r.mean_const},
              {"train_count", r.train_count},
              {"test_count", r.test_count},
              {"test_rmse", r.test_rmse ? number(*r.test_rmse) : json(nullptr)},
              {"test_pearson", r.test_pearson ? number(*r.test_pearson) : json(nullptr)},
              {"evaluations", r.evaluations},
              {"seed", r.seed},
              {"config", r.config},
              {"data", r.data},
              {"initial", r.initial ? to_json(*r.initial) : json(nullptr)},
              {"history", history},
              {"stop_reason", r.stop_reason},
              {"wall_seconds", r.wall_seconds}};
}

ResultRecord record_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kRecordVersion) throw Error("unsupported record version");
    ResultRecord r;
    r.command = j.at("command").get<std::string>();
    r.kernel = j.at("kernel").get<std::string>();
    r.dim = j.at("dim").get<int>();
    for (const auto& p : j.at("hyperparameters"))
      r.hyperparameters.push_back({p.at("name").get<std::string>(), p.at("log_value").get<double>(),
                                   p.at("value").get<double>()});
    auto theta = j.at("theta").get<std::vector<double>>();
    r.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    r.train_nll = j.at("train_nll").get<double>();
    r.mean_const = j.at("mean_const").get<double>();
    r.train_count = j.at("train_count").get<long>();
    r.test_count = j.at("test_count").get<long>();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (r.test_count > 0) {
      r.test_rmse = number_or(j.at("test_rmse"), nan);
      r.test_pearson = number_or(j.at("test_pearson"), nan);
    }
    r.evaluations = j.at("evaluations").get<long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    r.data = j.at("data").get<std::string>();
    if (!j.at("initial").is_null()) r.initial = generation_from_json(j.at("initial"));
    for (const auto& g : j.at("history")) r.history.push_back(generation_from_json(g));
    r.stop_reason = j.at("stop_reason").get<std::string>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed result record: ") + e.what());
  }
}

void save_record(const ResultRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(record).dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

ResultRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("'" + path + "' is not valid JSON: " + e.what());
  }
  return record_from_json(j);
}

}  // namespace covevo
