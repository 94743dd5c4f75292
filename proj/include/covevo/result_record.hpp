#pragma once

// Serialized outcome of a fit, evolution or random-search run.
//
// The record stores the raw optimizer vector (log-space) with round-trip
// precision next to the named constrained values, so a reloaded record
// rebuilds the exact model that produced it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "covevo/datasets.hpp"
#include "covevo/evolution.hpp"
#include "covevo/gp.hpp"
#include "covevo/kernel_expr.hpp"

namespace covevo {

inline constexpr int kRecordVersion = 1;

struct NamedParam {
  std::string name;   // e.g. "n2.SE.log_length"
  double log_value;   // optimizer coordinate
  double value;       // exp(log_value)
};

struct ResultRecord {
  std::string command;  // fit | evolve | random-search
  std::string kernel;
  int dim = 0;
  std::vector<NamedParam> hyperparameters;
  Eigen::VectorXd theta;
  double train_nll = 0.0;
  double mean_const = 0.0;
  long train_count = 0;
  long test_count = 0;
  std::optional<double> test_rmse;     // absent without a test partition
  std::optional<double> test_pearson;
  long evaluations = 0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string data;                   // dataset provenance
  std::optional<GenerationRecord> initial;
  std::vector<GenerationRecord> history;
  std::string stop_reason;
  double wall_seconds = 0.0;
};

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// NaN when either vector has zero variance.
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Fits the GP at the given hyperparameters on the training partition and
/// fills kernel, parameters, train NLL and test metrics.
ResultRecord make_record(const KernelExpr& expr, const Eigen::VectorXd& theta,
                         const Dataset& data);

/// Rebuilds the model stored in the record on the training partition of `data`.
GpModel record_model(const ResultRecord& record, const Dataset& data);

nlohmann::json to_json(const ResultRecord& record);
ResultRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationRecord& g);
GenerationRecord generation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvolutionConfig& c);

void save_record(const ResultRecord& record, const std::string& path);
ResultRecord load_record(const std::string& path);

}  // namespace covevo
