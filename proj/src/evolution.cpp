#include "covevo/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace covevo {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kRandomSearchStream = 0x7a6e64;
}  // namespace

void EvolutionConfig::validate() const {
  if (population_size < 2) throw Error("population size must be >= 2");
  if (max_generations < 0) throw Error("max generations must be >= 0");
  if (!(mutation_rate >= 0 && mutation_rate <= 1)) throw Error("mutation rate must be in [0, 1]");
  if (limits.max_length < 1 || limits.max_height < 1) throw Error("limits must be >= 1");
  if (ml2_iterations < 0) throw Error("ML-II iterations must be >= 0");
  if (restarts < 1 || final_restarts < 1) throw Error("restarts must be >= 1");
  if (!(success_ratio > 0 && success_ratio <= 1)) throw Error("success ratio must be in (0, 1]");
  if (!(comparison_factor >= 0 && comparison_factor <= 1))
    throw Error("comparison factor must be in [0, 1]");
  if (!(max_selection_pressure >= 1)) throw Error("max selection pressure must be >= 1");
  if (max_evaluations < 0) throw Error("max evaluations must be >= 0");
  if (workers < 1) throw Error("workers must be >= 1");
}

GrammarConfig EvolutionConfig::grammar(int dim) const {
  GrammarConfig g;
  g.dim = dim;
  g.limits = limits;
  return g;
}

// --- fitness ---------------------------------------------------------------

namespace {

Individual evaluate_on(const KernelExpr& expr, int dim, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const InitScales& scales,
                       const EvolutionConfig& config, std::uint64_t seed) {
  Individual ind{expr, std::nullopt, kInf};
  if (!is_valid_expr(expr, dim, config.limits)) return ind;
  Ml2Options opt;
  opt.restarts = config.restarts;
  opt.iterations = config.ml2_iterations;
  opt.seed = seed;
  opt.scales = scales;
  try {
    ind.opt = ml2_fit(expr, X, y, opt);
    ind.fitness = ind.opt->nll;
  } catch (const NumericalError&) {
    ind.opt.reset();
  }
  return ind;
}

}  // namespace

Individual evaluate(const KernelExpr& expr, const Dataset& data, const EvolutionConfig& config,
                    std::uint64_t seed) {
  const Eigen::MatrixXd X = data.train_X();
  const Eigen::VectorXd y = data.train_y();
  return evaluate_on(expr, data.dim(), X, y, InitScales::from_data(X, y), config, seed);
}

Individual refit(const Individual& ind, const Dataset& data, const EvolutionConfig& config) {
  if (!ind.opt) return ind;
  Ml2Options opt;
  opt.restarts = config.final_restarts;
  opt.iterations = config.ml2_iterations;
  opt.seed = derive_seed(config.seed, 0xf1a1);
  Individual out = ind;
  try {
    auto res = ml2_fit(ind.expr, data, opt);
    if (res.nll < ind.fitness) {
      out.opt = res;
      out.fitness = res.nll;
    }
  } catch (const NumericalError&) {
  }
  return out;
}

// --- selection -------------------------------------------------------------

std::pair<int, int> select_parents(const std::vector<Individual>& population, Rng& rng) {
  const int n = static_cast<int>(population.size());
  if (n == 0) throw Error("cannot select parents from an empty population");

  std::vector<int> finite;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(population[i].fitness)) finite.push_back(i);
  }
  int a;
  if (finite.empty()) {
    a = uniform_int(rng, 0, n - 1);
  } else {
    std::stable_sort(finite.begin(), finite.end(), [&](int l, int r) {
      return population[l].fitness < population[r].fitness;
    });
    std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
    // Ranks start at 1 for the best; tied fitness values share their mean rank.
    for (std::size_t start = 0; start < finite.size();) {
      std::size_t end = start;
      while (end < finite.size() &&
             population[finite[end]].fitness == population[finite[start]].fitness)
        ++end;
      double mean_rank = 0.5 * static_cast<double>(start + 1 + end);
      for (std::size_t k = start; k < end; ++k) weights[finite[k]] = n - mean_rank + 1;
      start = end;
    }
    std::discrete_distribution<int> dist(weights.begin(), weights.end());
    a = dist(rng);
  }
  int b = uniform_int(rng, 0, n - 1);
  return {a, b};
}

double acceptance_threshold(double parent_a, double parent_b, double comparison_factor) {
  const double better = std::min(parent_a, parent_b);
  const double worse = std::max(parent_a, parent_b);
  if (comparison_factor >= 1.0) return better;
  if (!std::isfinite(worse)) return kInf;
  return worse - comparison_factor * (worse - better);
}

// --- state -----------------------------------------------------------------

EvolutionState::EvolutionState(const Dataset& data, const EvolutionConfig& config)
    : config_(config), grammar_(config.grammar(data.dim())), dim_(data.dim()),
      X_(data.train_X()), y_(data.train_y()) {
  config_.validate();
  if (data.train.empty()) throw DataError("dataset has no training partition");
  scales_ = InitScales::from_data(X_, y_);
}

Individual EvolutionState::evaluate(const KernelExpr& expr, std::uint64_t seed) const {
  return evaluate_on(expr, dim_, X_, y_, scales_, config_, seed);
}

std::vector<Individual> EvolutionState::evaluate_all(
    const std::vector<std::pair<KernelExpr, std::uint64_t>>& jobs) const {
  std::vector<std::optional<Individual>> slots(jobs.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.workers), jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) slots[i] = evaluate(jobs[i].first, jobs[i].second);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t i = w; i < jobs.size(); i += workers)
          slots[i] = evaluate(jobs[i].first, jobs[i].second);
      });
    }
    for (auto& t : threads) t.join();
  }
  std::vector<Individual> out;
  out.reserve(jobs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void EvolutionState::record(const Individual& ind, int gen, bool is_child, double pa, double pb,
                            bool accepted) {
  EvaluationRecord r;
  r.index = total_evaluations++;
  r.generation = gen;
  r.expr = format_expr(ind.expr);
  r.metrics = expr_metrics(ind.expr);
  r.fitness = ind.fitness;
  r.is_child = is_child;
  r.parent_a_fitness = pa;
  r.parent_b_fitness = pb;
  r.accepted = accepted;
  log.push_back(std::move(r));
}

GenerationRecord summarize(const std::vector<Individual>& population, int generation) {
  GenerationRecord rec;
  rec.generation = generation;
  std::vector<double> f;
  for (const auto& ind : population) f.push_back(ind.fitness);
  std::sort(f.begin(), f.end());
  if (!f.empty()) {
    rec.best = f.front();
    rec.worst = f.back();
    const std::size_t m = f.size() / 2;
    rec.median = f.size() % 2 ? f[m] : 0.5 * (f[m - 1] + f[m]);
  }
  return rec;
}

namespace {

const Individual& best_of(const std::vector<Individual>& population) {
  return *std::min_element(population.begin(), population.end(),
                           [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
}

bool budget_left(const EvolutionState& state) {
  return state.config().max_evaluations == 0 ||
         state.total_evaluations < state.config().max_evaluations;
}

struct Offspring {
  KernelExpr expr;
  std::uint64_t eval_seed;
  double parent_a;
  double parent_b;
};

Offspring breed(const std::vector<Individual>& population, const EvolutionState& state,
                std::uint64_t seed) {
  Rng rng(seed);
  auto [a, b] = select_parents(population, rng);
  const auto& grammar = state.grammar();
  KernelExpr child = subtree_crossover(population[a].expr, population[b].expr, grammar, rng);
  if (uniform01(rng) < state.config().mutation_rate) child = mutate(child, grammar, rng);
  std::uint64_t eval_seed = rng();
  return Offspring{child, eval_seed, population[a].fitness, population[b].fitness};
}

}  // namespace

std::vector<Individual> initial_population(EvolutionState& state) {
  const auto& config = state.config();
  std::vector<std::pair<KernelExpr, std::uint64_t>> jobs;
  for (int i = 0; i < config.population_size; ++i) {
    Rng rng(derive_seed(config.seed, 0, static_cast<std::uint64_t>(i)));
    KernelExpr expr = random_expr(state.grammar(), rng);
    jobs.emplace_back(expr, rng());
  }
  auto population = state.evaluate_all(jobs);
  for (const auto& ind : population) state.record(ind, 0, false, 0.0, 0.0, true);
  return population;
}

GenerationOutcome run_generation(const std::vector<Individual>& population, EvolutionState& state) {
  const auto& config = state.config();
  const int gen = ++state.generation;
  const int popsize = config.population_size;
  const long max_children =
      static_cast<long>(std::floor(config.max_selection_pressure * popsize));
  const int quota = static_cast<int>(std::ceil(config.success_ratio * popsize - 1e-9));

  GenerationOutcome out;
  std::vector<Individual> accepted, rejected;
  long generated = 0;

  // Children are bred from per-index seeds and committed strictly in index
  // order, so the outcome does not depend on the number of workers.
  while (static_cast<int>(accepted.size()) < quota) {
    if (generated >= max_children) {
      out.terminate = true;
      out.reason = "selection pressure limit";
      break;
    }
    if (!budget_left(state)) {
      out.terminate = true;
      out.reason = "evaluation budget";
      break;
    }
    long batch = std::min<long>(config.workers, max_children - generated);
    if (config.max_evaluations > 0)
      batch = std::min(batch, config.max_evaluations - state.total_evaluations);
    std::vector<Offspring> kids;
    std::vector<std::pair<KernelExpr, std::uint64_t>> jobs;
    for (long k = 0; k < batch; ++k) {
      auto seed = derive_seed(config.seed, static_cast<std::uint64_t>(gen),
                              static_cast<std::uint64_t>(generated + k));
      kids.push_back(breed(population, state, seed));
      jobs.emplace_back(kids.back().expr, kids.back().eval_seed);
    }
    auto evaluated = state.evaluate_all(jobs);
    for (long k = 0; k < batch && static_cast<int>(accepted.size()) < quota; ++k) {
      const auto& kid = kids[k];
      auto& ind = evaluated[k];
      const double threshold =
          acceptance_threshold(kid.parent_a, kid.parent_b, config.comparison_factor);
      const bool ok = std::isfinite(ind.fitness) && ind.fitness < threshold;
      ++generated;
      state.record(ind, gen, true, kid.parent_a, kid.parent_b, ok);
      (ok ? accepted : rejected).push_back(std::move(ind));
    }
  }

  std::vector<Individual> next = std::move(accepted);
  const long accepted_count = static_cast<long>(next.size());
  std::stable_sort(rejected.begin(), rejected.end(),
                   [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
  for (auto& r : rejected) {
    if (static_cast<int>(next.size()) >= popsize) break;
    next.push_back(std::move(r));
  }
  if (static_cast<int>(next.size()) < popsize) {
    // Too few children overall (budget ran out): keep the best old individuals.
    std::vector<int> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return population[a].fitness < population[b].fitness; });
    for (int i : order) {
      if (static_cast<int>(next.size()) >= popsize) break;
      next.push_back(population[i]);
    }
  }

  // 1-elitism: the best individual so far survives.
  const Individual& elite = best_of(population);
  auto worst = std::max_element(next.begin(), next.end(), [](const Individual& a, const Individual& b) {
    return a.fitness < b.fitness;
  });
  if (best_of(next).fitness > elite.fitness) *worst = elite;

  out.record = summarize(next, gen);
  out.record.children = generated;
  out.record.accepted = accepted_count;
  out.record.evaluations = state.total_evaluations;
  out.record.selection_pressure = static_cast<double>(generated) / popsize;
  out.population = std::move(next);
  if (!out.terminate && !budget_left(state)) {
    out.terminate = true;
    out.reason = "evaluation budget";
  }
  return out;
}

RunReport evolve(const Dataset& data, const EvolutionConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  EvolutionState state(data, config);
  RunReport report;
  report.seed = config.seed;
  report.config = config;

  auto population = initial_population(state);
  report.initial = summarize(population, 0);
  report.initial.children = static_cast<long>(population.size());
  report.initial.accepted = report.initial.children;
  report.initial.evaluations = state.total_evaluations;
  report.stop_reason = "generation limit";

  for (int g = 0; g < config.max_generations; ++g) {
    if (!budget_left(state)) {
      report.stop_reason = "evaluation budget";
      break;
    }
    auto outcome = run_generation(population, state);
    population = std::move(outcome.population);
    report.generations.push_back(outcome.record);
    if (outcome.terminate) {
      report.stop_reason = outcome.reason;
      break;
    }
  }

  report.best = best_of(population);
  report.total_evaluations = state.total_evaluations;
  report.log = std::move(state.log);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

RunReport random_search(const Dataset& data, const EvolutionConfig& config, long budget) {
  if (budget < 1) throw Error("random search budget must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  EvolutionState state(data, config);
  RunReport report;
  report.seed = config.seed;
  report.config = config;
  report.stop_reason = "budget";

  std::optional<Individual> best;
  const long chunk = config.population_size;
  for (long begin = 0; begin < budget; begin += chunk) {
    const long end = std::min(budget, begin + chunk);
    std::vector<std::pair<KernelExpr, std::uint64_t>> jobs;
    for (long i = begin; i < end; ++i) {
      Rng rng(derive_seed(config.seed, kRandomSearchStream, static_cast<std::uint64_t>(i)));
      KernelExpr expr = random_expr(state.grammar(), rng);
      jobs.emplace_back(expr, rng());
    }
    auto batch = state.evaluate_all(jobs);
    const int gen = static_cast<int>(begin / chunk) + 1;
    for (const auto& ind : batch) {
      state.record(ind, gen, false, 0.0, 0.0, true);
      if (!best || ind.fitness < best->fitness) best = ind;
    }
    auto rec = summarize(batch, gen);
    rec.best = std::min(rec.best, best->fitness);  // best so far
    rec.children = static_cast<long>(batch.size());
    rec.accepted = rec.children;
    rec.evaluations = state.total_evaluations;
    rec.selection_pressure = static_cast<double>(batch.size()) / chunk;
    report.generations.push_back(rec);
  }
  report.best = best;
  report.total_evaluations = state.total_evaluations;
  report.log = std::move(state.log);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace covevo
