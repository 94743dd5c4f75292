#pragma once

// Helpers shared by the unit tests and the acceptance binary: random problems
// and dense reference implementations built from pointwise kernel calls.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "covevo/gp.hpp"
#include "covevo/grammar.hpp"
#include "covevo/kernel_eval.hpp"
#include "covevo/kernel_expr.hpp"
#include "covevo/random.hpp"

#ifndef COVEVO_DATA_DIR
#define COVEVO_DATA_DIR "data"
#endif

namespace covevo::testing {

inline std::string co2_path() { return std::string(COVEVO_DATA_DIR) + "/co2_mm_mlo.txt"; }

inline Eigen::VectorXd normal_vector(Eigen::Index n, Rng& rng, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> d(mean, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline Eigen::MatrixXd uniform_points(Eigen::Index n, Eigen::Index d, Rng& rng, double lo = -2.0,
                                      double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

/// Composite expression of at most `max_length` nodes over `dim` inputs.
inline KernelExpr random_composite(int dim, int max_length, Rng& rng) {
  GrammarConfig g;
  g.dim = dim;
  g.limits = {max_length, 5};
  return ptc2(g, uniform_int(rng, 2, max_length), rng);
}

/// Kernel parameters ~ N(0, sd), then a log-noise slot near `log_noise`.
inline Eigen::VectorXd random_theta(const KernelExpr& expr, Rng& rng, double sd = 1.0,
                                    double log_noise = -1.0) {
  const int p = expr_metrics(expr).param_count;
  Eigen::VectorXd theta(p + 1);
  theta.head(p) = normal_vector(p, rng, 0.0, sd);
  theta[p] = log_noise + 0.2 * normal_vector(1, rng)[0];
  return theta;
}

/// K(A, B) from pointwise evaluations; `same` marks A and B as one training set.
inline Eigen::MatrixXd dense_gram(const KernelExpr& expr, const Eigen::VectorXd& theta,
                                  const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, bool same) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      K(i, j) = eval_kernel(expr, theta, A.row(i).transpose(), B.row(j).transpose(), same && i == j);
  return K;
}

struct Problem {
  KernelExpr expr;
  Eigen::VectorXd theta;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

/// Random GP problem with n <= 10 and d <= 3. Redraws until the covariance
/// can be factorized; multi-dimensional Periodic terms can make it indefinite.
inline Problem random_problem(Rng& rng, int max_length = 10) {
  for (;;) {
    const int n = uniform_int(rng, 1, 10), d = uniform_int(rng, 1, 3);
    Problem p{random_composite(d, max_length, rng), {}, uniform_points(n, d, rng), normal_vector(n, rng)};
    p.theta = random_theta(p.expr, rng, 0.7);
    try {
      fit(p.expr, p.theta, p.X, p.y);
      return p;
    } catch (const CholeskyFailure&) {
    }
  }
}

struct DenseOracle {
  double nll;
  Eigen::VectorXd grad;  // kernel parameters, then log sigma
  Eigen::MatrixXd Kinv;
  Eigen::VectorXd alpha;
};

/// NLL and gradient through the explicit inverse and determinant of
/// K + (sigma^2 + jitter) I.
inline DenseOracle dense_nll(const KernelExpr& expr, const Eigen::VectorXd& theta,
                             const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double jitter) {
  const Eigen::Index n = X.rows();
  const int p = expr_metrics(expr).param_count;
  const double sigma2 = std::exp(2 * theta[p]);
  Eigen::MatrixXd K = dense_gram(expr, theta, X, X, true);
  K.diagonal().array() += sigma2 + jitter;
  const Eigen::VectorXd yc = y.array() - y.mean();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  DenseOracle o;
  o.Kinv = lu.inverse();
  o.alpha = o.Kinv * yc;
  o.nll = 0.5 * yc.dot(o.alpha) + 0.5 * std::log(lu.determinant()) +
          0.5 * n * std::log(2 * std::numbers::pi);
  const Eigen::MatrixXd W = o.alpha * o.alpha.transpose() - o.Kinv;
  o.grad.resize(p + 1);
  std::vector<Eigen::MatrixXd> dK(p, Eigen::MatrixXd(n, n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd g = eval_kernel_grad(expr, theta, X.row(i).transpose(), X.row(j).transpose(), i == j);
      for (int k = 0; k < p; ++k) dK[k](i, j) = g[k];
    }
  for (int k = 0; k < p; ++k) o.grad[k] = -0.5 * (W.cwiseProduct(dK[k])).sum();
  o.grad[p] = -0.5 * W.trace() * 2 * sigma2;
  return o;
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// Largest componentwise |a - b| / max(|a|, |b|), ignoring pairs that agree
/// to within `abs_floor`.
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double abs_floor) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (d <= abs_floor) continue;
    worst = std::max(worst, d / std::max(std::abs(a[i]), std::abs(b[i])));
  }
  return worst;
}

/// max|a - b| / max|b|: error relative to the scale of the reference.
inline double scaled_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace covevo::testing
