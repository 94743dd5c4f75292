#pragma once

// Offspring-selection genetic programming over covariance expressions.
//
// Fitness is the ML-II-optimized negative log marginal likelihood on the
// training partition (lower is better; failed evaluations get +inf).
// Parents are chosen gender-specifically: one by rank-proportional selection,
// one uniformly at random. A child is accepted into the next generation only
// if it beats the threshold between its parents set by the comparison factor
// (factor 1: strictly better than the better parent). A generation ends when
// enough children were accepted or when the number of generated children
// reaches max_selection_pressure * population_size.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covevo/datasets.hpp"
#include "covevo/grammar.hpp"
#include "covevo/hyperopt.hpp"
#include "covevo/kernel_expr.hpp"
#include "covevo/random.hpp"

namespace covevo {

struct EvolutionConfig {
  int population_size = 50;
  int max_generations = 20;
  double mutation_rate = 0.15;
  ExprLimits limits{25, 7};
  int ml2_iterations = 50;
  int restarts = 3;         // ML-II restarts per fitness evaluation
  int final_restarts = 10;  // restarts when refitting the winner
  double success_ratio = 1.0;
  double comparison_factor = 1.0;
  double max_selection_pressure = 100.0;
  long max_evaluations = 0;  // 0 = unlimited
  std::uint64_t seed = 1;
  int workers = 1;

  /// Throws Error when a field is out of range.
  void validate() const;
  GrammarConfig grammar(int dim) const;
};

struct Individual {
  KernelExpr expr;
  std::optional<OptResult> opt;  // empty when the evaluation failed
  double fitness;                // opt->nll, or +inf
};

struct EvaluationRecord {
  long index = 0;       // position in evaluation order
  int generation = 0;   // 0 = initial population / random-search draw
  std::string expr;
  ExprMetrics metrics;
  double fitness = 0.0;
  bool is_child = false;
  double parent_a_fitness = 0.0;
  double parent_b_fitness = 0.0;
  bool accepted = false;
};

struct GenerationRecord {
  int generation = 0;
  double best = 0.0;
  double median = 0.0;
  double worst = 0.0;
  long children = 0;      // children generated (and evaluated) in this generation
  long accepted = 0;
  long evaluations = 0;   // cumulative, including the initial population
  double selection_pressure = 0.0;
};

struct RunReport {
  GenerationRecord initial;                  // the evaluated initial population
  std::vector<GenerationRecord> generations;  // one per completed generation
  std::vector<EvaluationRecord> log;         // every evaluation, in order
  long total_evaluations = 0;
  std::optional<Individual> best;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  EvolutionConfig config;
  std::string stop_reason;
};

/// ML-II fitness of `expr` on the training partition. Invalid expressions
/// (e.g. a mask of the wrong length) and numerical failures give +inf.
Individual evaluate(const KernelExpr& expr, const Dataset& data, const EvolutionConfig& config,
                    std::uint64_t seed);

/// Indices of (parentA, parentB): A by rank-proportional weights
/// (popsize - rank + 1, ties share their mean rank, +inf gets weight 0),
/// B uniformly. An all-infinite population falls back to uniform for both.
std::pair<int, int> select_parents(const std::vector<Individual>& population, Rng& rng);

/// Acceptance threshold for a child of parents with the given fitness values.
double acceptance_threshold(double parent_a, double parent_b, double comparison_factor);

/// Per-run state shared across generations: cached training data, the
/// evaluation counter and the evaluation log.
class EvolutionState {
 public:
  EvolutionState(const Dataset& data, const EvolutionConfig& config);

  Individual evaluate(const KernelExpr& expr, std::uint64_t seed) const;
  /// Evaluates in parallel using config.workers threads; results keep input order.
  std::vector<Individual> evaluate_all(const std::vector<std::pair<KernelExpr, std::uint64_t>>& jobs) const;

  int generation = 0;
  long total_evaluations = 0;
  std::vector<EvaluationRecord> log;

  const EvolutionConfig& config() const { return config_; }
  const GrammarConfig& grammar() const { return grammar_; }

  /// Appends a log entry and bumps the evaluation counter.
  void record(const Individual& ind, int generation, bool is_child, double pa, double pb,
              bool accepted);

 private:
  EvolutionConfig config_;
  GrammarConfig grammar_;
  int dim_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  InitScales scales_;
};

struct GenerationOutcome {
  std::vector<Individual> population;
  GenerationRecord record;
  bool terminate = false;
  std::string reason;
};

/// Evaluates a PTC2-initialized population.
std::vector<Individual> initial_population(EvolutionState& state);

GenerationOutcome run_generation(const std::vector<Individual>& population, EvolutionState& state);

RunReport evolve(const Dataset& data, const EvolutionConfig& config);

/// `budget` independent PTC2 draws (target length uniform in [1, max_length]).
RunReport random_search(const Dataset& data, const EvolutionConfig& config, long budget);

/// Re-optimizes the winner with config.final_restarts restarts and keeps the
/// better of the new and the original optimum.
Individual refit(const Individual& ind, const Dataset& data, const EvolutionConfig& config);

GenerationRecord summarize(const std::vector<Individual>& population, int generation);

}  // namespace covevo
