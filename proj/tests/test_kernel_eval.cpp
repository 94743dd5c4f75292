#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <Eigen/Eigenvalues>

#include "covevo/kernel_eval.hpp"
#include "support.hpp"

using namespace covevo;
using namespace covevo::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double k(const char* text, int dim, const Eigen::VectorXd& theta, const Eigen::VectorXd& a,
         const Eigen::VectorXd& b, bool same = false) {
  return eval_kernel(parse_expr(text, dim), theta, a, b, same);
}

TEST(EvalKernel, ConstantIsOne) {
  EXPECT_DOUBLE_EQ(k("Constant", 1, vec({0.0}), vec({3}), vec({-7})), 1.0);
}

TEST(EvalKernel, SquaredExponentialClosedForm) {
  EXPECT_NEAR(k("SE", 1, vec({0, 0}), vec({0}), vec({std::sqrt(2.0)})), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(std::exp(-1.0), 0.367879, 1e-6);
}

TEST(EvalKernel, MaskIgnoresDroppedDimension) {
  EXPECT_DOUBLE_EQ(k("(Mask [1 0] SE)", 2, vec({0, 0}), vec({0, 5}), vec({0, -3})), 1.0);
}

TEST(EvalKernel, ProductAtZeroDistance) {
  EXPECT_DOUBLE_EQ(k("(Prod SE Constant)", 1, vec({0, 0, 0}), vec({1.5}), vec({1.5})), 1.0);
}

TEST(EvalKernel, TerminalFormulas) {
  const double ell = 1.7, sf = 0.8, alpha = 2.5, p = 1.3;
  const double le = std::log(ell), ls = std::log(sf);
  Eigen::VectorXd a = vec({0.3, -0.4}), b = vec({1.1, 0.5});
  const double r = (a - b).norm(), sf2 = sf * sf;
  EXPECT_NEAR(k("SE", 2, vec({le, ls}), a, b), sf2 * std::exp(-r * r / (2 * ell * ell)), 1e-14);
  EXPECT_NEAR(k("RQ", 2, vec({le, ls, std::log(alpha)}), a, b),
              sf2 * std::pow(1 + r * r / (2 * alpha * ell * ell), -alpha), 1e-14);
  EXPECT_NEAR(k("Matern1", 2, vec({le, ls}), a, b), sf2 * std::exp(-r / ell), 1e-14);
  const double u3 = std::sqrt(3.0) * r / ell, u5 = std::sqrt(5.0) * r / ell;
  EXPECT_NEAR(k("Matern3", 2, vec({le, ls}), a, b), sf2 * (1 + u3) * std::exp(-u3), 1e-14);
  EXPECT_NEAR(k("Matern5", 2, vec({le, ls}), a, b), sf2 * (1 + u5 + u5 * u5 / 3) * std::exp(-u5), 1e-14);
  const double s = std::sin(std::numbers::pi * r / p);
  EXPECT_NEAR(k("Periodic", 2, vec({le, std::log(p), ls}), a, b),
              sf2 * std::exp(-2 * s * s / (ell * ell)), 1e-14);
  EXPECT_NEAR(k("Linear", 2, vec({le}), a, b), a.dot(b) / (ell * ell), 1e-14);
  EXPECT_NEAR(k("Noise", 2, vec({ls}), a, b), 0.0, 0.0);
  EXPECT_NEAR(k("Noise", 2, vec({ls}), a, a), 0.0, 0.0);  // same coordinates, different samples
  EXPECT_NEAR(k("Noise", 2, vec({ls}), a, a, true), sf2, 1e-15);
  EXPECT_NEAR(k("(Scale SE)", 2, vec({std::log(3.0), le, ls}), a, b),
              9 * sf2 * std::exp(-r * r / (2 * ell * ell)), 1e-13);
}

TEST(EvalKernel, EmptyMaskIsZeroDistance) {
  Eigen::VectorXd a = vec({0.3, -0.4}), b = vec({1.1, 0.5});
  EXPECT_DOUBLE_EQ(k("(Mask [0 0] SE)", 2, vec({0.2, 0.1}), a, b), std::exp(0.2));
  EXPECT_DOUBLE_EQ(k("(Mask [0 0] Linear)", 2, vec({0.2}), a, b), 0.0);
}

TEST(EvalKernel, NestedMasksIntersect) {
  Eigen::VectorXd a = vec({0.0, 1.0, 2.0}), b = vec({3.0, 1.0, -2.0});
  const double nested = k("(Mask [1 1 0] (Mask [0 1 1] SE))", 3, vec({0, 0}), a, b);
  EXPECT_DOUBLE_EQ(nested, 1.0);  // only dimension 1 survives and it agrees
}

TEST(EvalKernel, DimensionMismatchThrows) {
  auto e = parse_expr("SE", 2);
  EXPECT_THROW(eval_kernel(e, vec({0, 0}), vec({1, 2}), vec({1})), DimensionError);
  EXPECT_THROW(eval_kernel(e, vec({0}), vec({1, 2}), vec({1, 2})), DimensionError);
}

TEST(EvalKernelGrad, StationaryPointOfSquaredExponential) {
  const double sf = 1.4;
  auto g = eval_kernel_grad(parse_expr("SE", 1), vec({0.3, std::log(sf)}), vec({0.7}), vec({0.7}));
  EXPECT_NEAR(g[0], 0.0, 1e-15);
  EXPECT_NEAR(g[1], 2 * sf * sf, 1e-13);
}

void check_gradient(const KernelExpr& e, const Eigen::VectorXd& theta, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b, bool same) {
  auto g = eval_kernel_grad(e, theta, a, b, same);
  auto fd = central_difference([&](const Eigen::VectorXd& t) { return eval_kernel(e, t, a, b, same); }, theta);
  ASSERT_EQ(g.size(), expr_metrics(e).param_count);
  EXPECT_LT(max_rel_error(g, fd.head(g.size()), 1e-7), 1e-4) << format_expr(e);
}

TEST(EvalKernelGrad, EveryTerminalMatchesFiniteDifferences) {
  Rng rng(5);
  for (auto kind : kAllTerminals) {
    auto e = KernelExpr::terminal(kind);
    for (int trial = 0; trial < 20; ++trial) {
      auto theta = random_theta(e, rng);
      auto X = uniform_points(2, 2, rng);
      check_gradient(e, theta, X.row(0).transpose(), X.row(1).transpose(), false);
      check_gradient(e, theta, X.row(0).transpose(), X.row(0).transpose(), true);
    }
  }
}

TEST(EvalKernelGrad, RandomCompositesMatchFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = uniform_int(rng, 1, 3);
    auto e = random_composite(dim, 10, rng);
    auto theta = random_theta(e, rng);
    auto X = uniform_points(2, dim, rng);
    check_gradient(e, theta, X.row(0).transpose(), X.row(1).transpose(), trial % 5 == 0);
  }
}

TEST(EvalKernel, Symmetric) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = uniform_int(rng, 1, 3);
    auto e = random_composite(dim, 12, rng);
    auto theta = random_theta(e, rng);
    auto X = uniform_points(2, dim, rng);
    const double ab = eval_kernel(e, theta, X.row(0).transpose(), X.row(1).transpose());
    const double ba = eval_kernel(e, theta, X.row(1).transpose(), X.row(0).transpose());
    EXPECT_LE(std::abs(ab - ba), 1e-12 * std::max(1.0, std::abs(ab))) << format_expr(e);
  }
}

TEST(EvalKernel, MaskEqualsExplicitProjection) {
  Rng rng(8);
  GrammarConfig g;
  g.operators = {NodeKind::Sum, NodeKind::Prod, NodeKind::Scale};  // inner masks see all inputs
  for (int trial = 0; trial < 100; ++trial) {
    BitVector bits(3);
    for (auto& bit : bits) bit = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
    const int active = bits[0] + bits[1] + bits[2];
    g.dim = std::max(active, 1);
    auto child = ptc2(g, 6, rng);
    if (active == 0) child = KernelExpr::terminal(TerminalKind::SE);
    auto masked = KernelExpr::mask(bits, child);
    auto theta = random_theta(child, rng);
    auto X = uniform_points(2, 3, rng);
    Eigen::VectorXd pa(active), pb(active);
    for (int d = 0, j = 0; d < 3; ++d)
      if (bits[d]) {
        pa[j] = X(0, d);
        pb[j++] = X(1, d);
      }
    const double direct = eval_kernel(masked, theta, X.row(0).transpose(), X.row(1).transpose());
    if (active == 0) {
      EXPECT_EQ(direct, eval_kernel(child, theta, vec({0.0}), vec({0.0})));
    } else {
      EXPECT_EQ(direct, eval_kernel(child, theta, pa, pb)) << format_expr(masked);
    }
  }
}

// Periodic on the Euclidean distance is positive semidefinite only for
// one-dimensional inputs, so it is left out of the multi-dimensional draws.
TEST(EvalKernel, GramMatricesArePositiveSemidefinite) {
  Rng rng(9);
  for (int trial = 0; trial < 150; ++trial) {
    const int dim = trial < 50 ? 1 : uniform_int(rng, 2, 3);
    GrammarConfig g;
    g.dim = dim;
    g.limits = {12, 5};
    std::erase(g.terminals, TerminalKind::Noise);
    if (dim > 1) std::erase(g.terminals, TerminalKind::Periodic);
    auto e = ptc2(g, 12, rng);
    auto theta = random_theta(e, rng, 0.5);
    auto X = uniform_points(20, dim, rng);
    Eigen::MatrixXd K = dense_gram(e, theta, X, X, true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8 * std::max(hi, 1e-300)) << format_expr(e);
  }
}

}  // namespace
