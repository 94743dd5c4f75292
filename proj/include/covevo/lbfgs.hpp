#pragma once

#include <functional>

#include <Eigen/Core>

namespace covevo {

/// Objective callback: returns f(theta) and writes the gradient into `grad`.
/// Signal failure (e.g. a Cholesky cliff) by returning a non-finite value or
/// throwing a NumericalError.
using Objective = std::function<double(const Eigen::VectorXd& theta, Eigen::VectorXd& grad)>;

struct MinimizeOptions {
  int max_iterations = 50;
  int history = 10;
  double gradient_tolerance = 1e-6;   // on the max-norm of the gradient
  double relative_tolerance = 1e-9;   // on |f_k - f_{k+1}| / max(|f_k|, |f_{k+1}|, 1)
  int max_line_search_evals = 20;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  double initial_step = 0.1;  // max-norm of the first trial step along -g
};

struct MinimizeResult {
  Eigen::VectorXd theta;
  double value = 0.0;
  double initial_value = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  int failed_evaluations = 0;
};

/// Limited-memory BFGS with a strong-Wolfe line search. Never returns a value
/// above the starting value. Throws NumericalError only if the objective
/// fails at theta0.
MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& theta0,
                        const MinimizeOptions& options = {});

}  // namespace covevo
