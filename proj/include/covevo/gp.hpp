#pragma once

// Exact Gaussian-process regression with a constant mean.
//
// theta layout: kernel hyperparameters (see ParamLayout) followed by log(sigma),
// the observation-noise standard deviation. The marginal covariance of the
// training targets is K(X, X) + sigma^2 I (+ jitter).

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "covevo/gram.hpp"
#include "covevo/kernel_expr.hpp"

namespace covevo {

struct GpModel {
  KernelExpr expr;
  Eigen::VectorXd theta;
  Eigen::MatrixXd X;
  Eigen::VectorXd y_centered;
  double mean_const = 0.0;
  Eigen::MatrixXd L;  // lower Cholesky factor of K + sigma^2 I + jitter I
  Eigen::VectorXd alpha;
  double jitter = 0.0;
  double nll = 0.0;
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;                  // of f*, not y*, unless include_noise
  std::optional<Eigen::MatrixXd> covariance;  // only with full_covariance
};

struct PredictOptions {
  bool full_covariance = false;
  /// Adds sigma^2 and the Noise terminals to the predictive variance (y* instead of f*).
  bool include_noise = false;
};

/// K(X, X) including Noise terminals on the diagonal (by index), without sigma^2.
Eigen::MatrixXd build_gram(const KernelExpr& expr, const Eigen::VectorXd& theta,
                           const Eigen::MatrixXd& X);

/// Throws CholeskyFailure when K + sigma^2 I cannot be factorized even after jitter.
GpModel fit(const KernelExpr& expr, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
            const Eigen::VectorXd& y);

/// dNLL/dtheta, length param_count + 1 (noise slot last).
Eigen::VectorXd nll_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

Prediction predict(const GpModel& model, const Eigen::MatrixXd& Xstar,
                   const PredictOptions& options = {});

/// One draw of f ~ N(0, K(X, X)) (Noise terminals included by index).
Eigen::VectorXd sample_prior(const KernelExpr& expr, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& X, std::uint64_t seed);

/// Reusable NLL objective on a fixed training set: pairwise geometry is
/// computed once and shared by all evaluations. Not thread-safe.
class NllObjective {
 public:
  NllObjective(KernelExpr expr, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

  int dimension() const { return param_count_ + 1; }
  double mean_const() const { return mean_; }

  /// NLL at theta; fills `grad` when non-null. Throws NumericalError subclasses.
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad);

  /// Full fitted state at theta.
  GpModel model(const Eigen::VectorXd& theta);

 private:
  KernelExpr expr_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd yc_;
  double mean_ = 0.0;
  int param_count_ = 0;
  PairGeometry geometry_;
};

/// Cholesky with the escalating-jitter policy: start at 1e-10 * mean(diag),
/// multiply by 10 up to 1e-4 * mean(diag). Returns the factor and the jitter used.
std::pair<Eigen::MatrixXd, double> jittered_cholesky(const Eigen::MatrixXd& K,
                                                     double start_fraction = 1e-10,
                                                     double max_fraction = 1e-4);

}  // namespace covevo
