#include "covevo/gp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace covevo {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2 * std::numbers::pi);

// Factorizes K + jitter I, escalating jitter on failure.
Eigen::LLT<Eigen::MatrixXd> factorize(Eigen::MatrixXd K, double start_fraction,
                                      double max_fraction, double& jitter) {
  if (!K.allFinite()) throw CholeskyFailure("covariance matrix has non-finite entries");
  const double scale = K.diagonal().mean();
  if (!(scale > 0)) throw CholeskyFailure("covariance matrix has non-positive mean diagonal");
  for (double fraction = start_fraction; fraction <= max_fraction * (1 + 1e-9); fraction *= 10) {
    jitter = fraction * scale;
    Eigen::MatrixXd A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt;
  }
  throw CholeskyFailure("Cholesky factorization failed after jitter escalation");
}

}  // namespace

std::pair<Eigen::MatrixXd, double> jittered_cholesky(const Eigen::MatrixXd& K,
                                                     double start_fraction, double max_fraction) {
  double jitter = 0;
  auto llt = factorize(K, start_fraction, max_fraction, jitter);
  return {llt.matrixL(), jitter};
}

Eigen::MatrixXd build_gram(const KernelExpr& expr, const Eigen::VectorXd& theta,
                           const Eigen::MatrixXd& X) {
  PairGeometry geometry(X);
  return kernel_matrix(expr, theta, geometry);
}

NllObjective::NllObjective(KernelExpr expr, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
    : expr_(std::move(expr)), X_(X), geometry_(X) {
  if (X.rows() < 1) throw DataError("need at least one training point");
  if (y.size() != X.rows()) throw DimensionError("X and y have different row counts");
  if (!y.allFinite()) throw DataError("targets must be finite");
  validate_expr(expr_, static_cast<int>(X.cols()), ExprLimits{1 << 20, 1 << 20});
  mean_ = y.mean();
  yc_ = y.array() - mean_;
  param_count_ = expr_metrics(expr_).param_count;
}

double NllObjective::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
  if (theta.size() != dimension()) throw DimensionError("hyperparameter vector has wrong length");
  const double log_sigma = theta[param_count_];
  if (!std::isfinite(log_sigma)) throw NumericalError("non-finite noise hyperparameter");
  const double sigma2 = std::exp(2 * log_sigma);

  GramTape tape(expr_, theta, geometry_);
  Eigen::MatrixXd K = tape.matrix();
  K.diagonal().array() += sigma2;
  double jitter = 0;
  auto llt = factorize(std::move(K), 1e-10, 1e-4, jitter);

  const Eigen::Index n = yc_.size();
  Eigen::VectorXd alpha = llt.solve(yc_);
  const double nll = 0.5 * yc_.dot(alpha) +
                     llt.matrixLLT().diagonal().array().log().sum() + n * kHalfLog2Pi;
  if (!std::isfinite(nll)) throw NumericalError("negative log-likelihood is not finite");

  if (grad) {
    // adjoint G = dNLL/dK = 0.5 (K^-1 - alpha alpha^T), needed only in the
    // packed upper-triangle layout of the tape: G_jj on the diagonal and
    // G_ij + G_ji = 2 G_ij elsewhere.
    Eigen::MatrixXd Linv = Eigen::MatrixXd::Identity(n, n);
    llt.matrixL().solveInPlace(Linv);
    Eigen::MatrixXd Kinv = Eigen::MatrixXd::Zero(n, n);
    Kinv.selfadjointView<Eigen::Upper>().rankUpdate(Linv.transpose());
    Eigen::ArrayXd packed(geometry_.pairs());
    double trace = 0;
    Eigen::Index p = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double aj = alpha[j];
      for (Eigen::Index i = 0; i < j; ++i, ++p) packed[p] = Kinv(i, j) - alpha[i] * aj;
      const double gjj = 0.5 * (Kinv(j, j) - aj * aj);
      packed[p++] = gjj;
      trace += gjj;
    }
    grad->resize(dimension());
    grad->head(param_count_) = tape.contract_gradient_flat(packed);
    (*grad)[param_count_] = 2 * sigma2 * trace;
    if (!grad->allFinite()) throw NumericalError("gradient is not finite");
  }
  return nll;
}

GpModel NllObjective::model(const Eigen::VectorXd& theta) {
  if (theta.size() != dimension()) throw DimensionError("hyperparameter vector has wrong length");
  const double sigma2 = std::exp(2 * theta[param_count_]);
  Eigen::MatrixXd K = kernel_matrix(expr_, theta, geometry_);
  K.diagonal().array() += sigma2;

  GpModel m{expr_, theta, X_, yc_, mean_, {}, {}, 0.0, 0.0};
  auto llt = factorize(std::move(K), 1e-10, 1e-4, m.jitter);
  m.L = llt.matrixL();
  m.alpha = llt.solve(yc_);
  m.nll = 0.5 * yc_.dot(m.alpha) + m.L.diagonal().array().log().sum() +
          static_cast<double>(yc_.size()) * kHalfLog2Pi;
  if (!std::isfinite(m.nll)) throw NumericalError("negative log-likelihood is not finite");
  return m;
}

GpModel fit(const KernelExpr& expr, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
            const Eigen::VectorXd& y) {
  NllObjective objective(expr, X, y);
  return objective.model(theta);
}

Eigen::VectorXd nll_gradient(const KernelExpr& expr, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  NllObjective objective(expr, X, y);
  Eigen::VectorXd grad;
  objective.evaluate(theta, &grad);
  return grad;
}

Prediction predict(const GpModel& model, const Eigen::MatrixXd& Xstar,
                   const PredictOptions& options) {
  if (Xstar.cols() != model.X.cols()) throw DimensionError("prediction inputs have wrong dimension");
  PairGeometry cross(Xstar, model.X);
  const Eigen::MatrixXd Ks = kernel_matrix(model.expr, model.theta, cross);  // m x n

  Prediction out;
  out.mean = (Ks * model.alpha).array() + model.mean_const;

  // V = L^-1 K(X, X*)
  Eigen::MatrixXd V = Ks.transpose();
  model.L.triangularView<Eigen::Lower>().solveInPlace(V);

  const double sigma2 = std::exp(2 * model.theta[model.theta.size() - 1]);
  if (options.full_covariance) {
    // Noise terminals describe observation noise, not f*; a cross geometry
    // between Xstar and itself switches them off.
    PairGeometry g = options.include_noise ? PairGeometry(Xstar) : PairGeometry(Xstar, Xstar);
    Eigen::MatrixXd Kss = kernel_matrix(model.expr, model.theta, g);
    if (options.include_noise) Kss.diagonal().array() += sigma2;
    Eigen::MatrixXd cov = Kss;
    cov.noalias() -= V.transpose() * V;
    out.variance = cov.diagonal();
    out.covariance = std::move(cov);
  } else {
    out.variance.resize(Xstar.rows());
    const bool noise_terms = options.include_noise;
    for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
      Eigen::MatrixXd xi = Xstar.row(i);
      PairGeometry g = noise_terms ? PairGeometry(xi) : PairGeometry(xi, xi);
      double prior = kernel_matrix(model.expr, model.theta, g)(0, 0);
      if (noise_terms) prior += sigma2;
      out.variance[i] = prior - V.col(i).squaredNorm();
    }
  }
  // Roundoff can push tiny variances below zero.
  out.variance = out.variance.cwiseMax(0.0);
  return out;
}

Eigen::VectorXd sample_prior(const KernelExpr& expr, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& X, std::uint64_t seed) {
  const Eigen::MatrixXd K = build_gram(expr, theta, X);
  double jitter = 0;
  auto llt = factorize(K, 1e-8, 1e-4, jitter);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(X.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return llt.matrixL() * z;
}

}  // namespace covevo
