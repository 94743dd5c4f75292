#pragma once

// ML-II: fit kernel hyperparameters by minimizing the negative log marginal
// likelihood from several random starting points.

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "covevo/datasets.hpp"
#include "covevo/kernel_expr.hpp"
#include "covevo/lbfgs.hpp"
#include "covevo/random.hpp"

namespace covevo {

/// Centres of the random initialization, derived from the training data.
struct InitScales {
  double log_length = 0.0;     // log of the median pairwise input distance
  double log_amplitude = 0.0;  // log std(y)
  double log_noise = 0.0;      // log(0.1 std(y))
  double spread = 0.5;         // standard deviation of every draw
  /// Log of the dominant period of one-dimensional data (see dominant_period).
  /// Even-numbered restarts start every Periodic terminal exactly there.
  std::optional<double> log_period;

  static InitScales from_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
};

/// Period with the most Lomb-Scargle power in y after removing a quadratic
/// trend in x. Candidates run from two median sample spacings to a third of
/// the span. Empty when there are too few distinct points.
std::optional<double> dominant_period(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// One random starting point (kernel parameters in preorder, then log sigma).
/// With `period_centre`, Periodic periods start at scales.log_period when it
/// is set; all other coordinates are drawn identically either way.
Eigen::VectorXd draw_initial_theta(const KernelExpr& expr, const InitScales& scales, Rng& rng,
                                   bool period_centre = false);

struct Ml2Options {
  int restarts = 3;
  int iterations = 50;
  std::uint64_t seed = 0;
  std::optional<InitScales> scales;  // computed from the data when absent
  MinimizeOptions minimizer{};        // max_iterations is overridden by `iterations`
};

struct OptResult {
  Eigen::VectorXd theta;
  double nll = 0.0;
  double initial_nll = 0.0;  // starting value of the winning restart
  int iterations = 0;        // of the winning restart
  int restart = -1;          // index of the winning restart
  bool converged = false;
  int failures = 0;          // restarts whose objective failed at the start
  int evaluations = 0;       // objective calls over all restarts
};

/// Restart r starts from a draw seeded by (seed, r) only, so adding restarts
/// never changes the earlier ones. Throws AllRestartsFailed.
OptResult ml2_fit(const KernelExpr& expr, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Ml2Options& options);

/// Fits on the dataset's training partition.
OptResult ml2_fit(const KernelExpr& expr, const Dataset& data, const Ml2Options& options);

}  // namespace covevo
