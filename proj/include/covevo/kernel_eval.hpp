#pragma once

// Pointwise covariance evaluation k(x, x') and its hyperparameter gradient.
//
// Terminal forms (sf = amplitude, ell = length-scale, r = |x - x'| on the active dims):
//   SE        sf^2 exp(-r^2 / (2 ell^2))
//   RQ        sf^2 (1 + r^2 / (2 alpha ell^2))^(-alpha)
//   MaternN   sf^2 f_nu(sqrt(nu) r / ell), nu = 1/2, 3/2, 5/2
//   Periodic  sf^2 exp(-2 sin^2(pi r / p) / ell^2)
//   Linear    <x, x'> / ell^2
//   Constant  sf^2
//   Noise     sf^2 if both arguments are the same training point, else 0
// Scale multiplies its child by s^2. Mask restricts the child to the dims whose
// bit is 1; nested masks intersect.
//
// Every positive quantity is stored as its logarithm; gradients are taken with
// respect to those logarithms.

#include <Eigen/Core>

#include "covevo/kernel_expr.hpp"

namespace covevo {

/// `theta` holds at least expr_metrics(expr).param_count values (a trailing
/// noise slot is ignored). `same_index` marks the two points as one training
/// sample, which is what activates Noise terminals.
double eval_kernel(const KernelExpr& expr, const Eigen::VectorXd& theta,
                   const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2, bool same_index = false);

/// dk/dtheta_j for every kernel hyperparameter (length = param_count).
Eigen::VectorXd eval_kernel_grad(const KernelExpr& expr, const Eigen::VectorXd& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& x2,
                                 bool same_index = false);

}  // namespace covevo
