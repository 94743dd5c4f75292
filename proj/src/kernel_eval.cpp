#include "covevo/kernel_eval.hpp"

#include <cmath>
#include <numbers>

namespace covevo {

namespace {

struct PointPair {
  const Eigen::Ref<const Eigen::VectorXd>& x;
  const Eigen::Ref<const Eigen::VectorXd>& x2;
  bool same_index;
};

void check_finite(const double* p, int count) {
  for (int i = 0; i < count; ++i) {
    if (!std::isfinite(p[i])) throw NumericalError("non-finite hyperparameter");
  }
}

// Value of a terminal and, if grad != nullptr, its gradient w.r.t. the
// terminal's own (log-space) parameters.
double terminal(TerminalKind kind, const double* p, const PointPair& pts, const BitVector& active,
                double* grad) {
  double r2 = 0.0;
  double dot = 0.0;
  for (Eigen::Index d = 0; d < pts.x.size(); ++d) {
    if (!active[d]) continue;
    double diff = pts.x[d] - pts.x2[d];
    r2 += diff * diff;
    dot += pts.x[d] * pts.x2[d];
  }
  const double r = std::sqrt(r2);

  switch (kind) {
    case TerminalKind::SE: {
      double ell2 = std::exp(2 * p[0]), sf2 = std::exp(2 * p[1]);
      double k = sf2 * std::exp(-0.5 * r2 / ell2);
      if (grad) {
        grad[0] = k * r2 / ell2;
        grad[1] = 2 * k;
      }
      return k;
    }
    case TerminalKind::RQ: {
      double ell2 = std::exp(2 * p[0]), sf2 = std::exp(2 * p[1]), alpha = std::exp(p[2]);
      double t = 1.0 + 0.5 * r2 / (alpha * ell2);
      double k = sf2 * std::pow(t, -alpha);
      if (grad) {
        grad[0] = k * r2 / (ell2 * t);
        grad[1] = 2 * k;
        grad[2] = k * alpha * (-std::log(t) + (t - 1.0) / t);
      }
      return k;
    }
    case TerminalKind::Matern1: {
      double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
      double u = r / ell;
      double k = sf2 * std::exp(-u);
      if (grad) {
        grad[0] = k * u;
        grad[1] = 2 * k;
      }
      return k;
    }
    case TerminalKind::Matern3: {
      double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
      double u = std::sqrt(3.0) * r / ell;
      double e = std::exp(-u);
      double k = sf2 * (1 + u) * e;
      if (grad) {
        grad[0] = sf2 * u * u * e;
        grad[1] = 2 * k;
      }
      return k;
    }
    case TerminalKind::Matern5: {
      double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
      double u = std::sqrt(5.0) * r / ell;
      double e = std::exp(-u);
      double k = sf2 * (1 + u + u * u / 3) * e;
      if (grad) {
        grad[0] = sf2 * (u * u / 3) * (1 + u) * e;
        grad[1] = 2 * k;
      }
      return k;
    }
    case TerminalKind::Periodic: {
      double ell2 = std::exp(2 * p[0]), period = std::exp(p[1]), sf2 = std::exp(2 * p[2]);
      double arg = std::numbers::pi * r / period;
      double s = std::sin(arg), c = std::cos(arg);
      double k = sf2 * std::exp(-2 * s * s / ell2);
      if (grad) {
        grad[0] = k * 4 * s * s / ell2;
        grad[1] = k * 4 * arg * s * c / ell2;
        grad[2] = 2 * k;
      }
      return k;
    }
    case TerminalKind::Linear: {
      double ell2 = std::exp(2 * p[0]);
      double k = dot / ell2;
      if (grad) grad[0] = -2 * k;
      return k;
    }
    case TerminalKind::Constant: {
      double k = std::exp(2 * p[0]);
      if (grad) grad[0] = 2 * k;
      return k;
    }
    case TerminalKind::Noise: {
      double k = pts.same_index ? std::exp(2 * p[0]) : 0.0;
      if (grad) grad[0] = 2 * k;
      return k;
    }
  }
  return 0.0;
}

// Forward-mode recursion. `grad` (if non-null) is a full-length vector that
// receives this subtree's partial derivatives in its own parameter slots.
double eval_node(const KernelExpr& e, const Eigen::VectorXd& theta, int& offset,
                 const PointPair& pts, const BitVector& active, Eigen::VectorXd* grad) {
  switch (e.kind()) {
    case NodeKind::Terminal: {
      int count = terminal_param_count(e.terminal_kind());
      if (offset + count > theta.size()) throw DimensionError("too few hyperparameters");
      const double* p = theta.data() + offset;
      check_finite(p, count);
      double* g = grad ? grad->data() + offset : nullptr;
      offset += count;
      return terminal(e.terminal_kind(), p, pts, active, g);
    }
    case NodeKind::Scale: {
      if (offset + 1 > theta.size()) throw DimensionError("too few hyperparameters");
      check_finite(theta.data() + offset, 1);
      int self = offset++;
      double s2 = std::exp(2 * theta[self]);
      double child = eval_node(e.children()[0], theta, offset, pts, active, grad);
      if (grad) {
        for (int j = self + 1; j < offset; ++j) (*grad)[j] *= s2;
        (*grad)[self] = 2 * s2 * child;
      }
      return s2 * child;
    }
    case NodeKind::Mask: {
      if (static_cast<Eigen::Index>(e.bits().size()) != pts.x.size())
        throw MaskLengthError("mask length does not match input dimension");
      BitVector sub(active.size());
      for (std::size_t d = 0; d < active.size(); ++d) sub[d] = active[d] & e.bits()[d];
      return eval_node(e.children()[0], theta, offset, pts, sub, grad);
    }
    case NodeKind::Sum: {
      double total = 0.0;
      for (const auto& c : e.children()) total += eval_node(c, theta, offset, pts, active, grad);
      return total;
    }
    case NodeKind::Prod: {
      auto kids = e.children();
      const std::size_t m = kids.size();
      std::vector<double> values(m);
      std::vector<int> begin(m + 1);
      for (std::size_t i = 0; i < m; ++i) {
        begin[i] = offset;
        values[i] = eval_node(kids[i], theta, offset, pts, active, grad);
      }
      begin[m] = offset;
      double product = 1.0;
      for (double v : values) product *= v;
      if (grad) {
        for (std::size_t i = 0; i < m; ++i) {
          double others = 1.0;
          for (std::size_t j = 0; j < m; ++j) {
            if (j != i) others *= values[j];
          }
          for (int k = begin[i]; k < begin[i + 1]; ++k) (*grad)[k] *= others;
        }
      }
      return product;
    }
  }
  return 0.0;
}

double run(const KernelExpr& expr, const Eigen::VectorXd& theta,
           const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x2,
           bool same_index, Eigen::VectorXd* grad) {
  if (x.size() != x2.size()) throw DimensionError("points have different dimensions");
  if (x.size() < 1) throw DimensionError("points must have at least one dimension");
  PointPair pts{x, x2, same_index};
  BitVector all(static_cast<std::size_t>(x.size()), 1);
  int offset = 0;
  double k = eval_node(expr, theta, offset, pts, all, grad);
  if (!std::isfinite(k)) throw NumericalError("kernel value is not finite");
  return k;
}

}  // namespace

double eval_kernel(const KernelExpr& expr, const Eigen::VectorXd& theta,
                   const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2, bool same_index) {
  return run(expr, theta, x, x2, same_index, nullptr);
}

Eigen::VectorXd eval_kernel_grad(const KernelExpr& expr, const Eigen::VectorXd& theta,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& x2, bool same_index) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(expr_metrics(expr).param_count);
  if (theta.size() < grad.size()) throw DimensionError("too few hyperparameters");
  run(expr, theta, x, x2, same_index, &grad);
  return grad;
}

}  // namespace covevo
