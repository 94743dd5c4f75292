#include "covevo/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "covevo/error.hpp"

namespace covevo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Trial {
  double step = 0.0;
  double f = kInf;
  double slope = 0.0;  // directional derivative g(x + step p) . p
  Eigen::VectorXd x, g;
  bool ok = false;
};

class Evaluator {
 public:
  Evaluator(const Objective& objective, MinimizeResult& stats)
      : objective_(objective), stats_(stats) {}

  bool operator()(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
    ++stats_.evaluations;
    try {
      f = objective_(x, g);
    } catch (const NumericalError&) {
      f = kInf;
    }
    bool ok = std::isfinite(f) && g.size() == x.size() && g.allFinite();
    if (!ok) {
      ++stats_.failed_evaluations;
      f = kInf;
    }
    return ok;
  }

 private:
  const Objective& objective_;
  MinimizeResult& stats_;
};

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db); NaN if
// the interpolant has no usable minimizer.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  double d1 = da + db - 3 * (fa - fb) / (a - b);
  double disc = d1 * d1 - da * db;
  if (!(disc >= 0)) return std::numeric_limits<double>::quiet_NaN();
  double d2 = std::copysign(std::sqrt(disc), b - a);
  double denom = db - da + 2 * d2;
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (db + d2 - d1) / denom;
}

class WolfeSearch {
 public:
  WolfeSearch(Evaluator& eval, const MinimizeOptions& opt, const Eigen::VectorXd& x0, double f0,
              const Eigen::VectorXd& p, double slope0)
      : eval_(eval), opt_(opt), x0_(x0), f0_(f0), p_(p), slope0_(slope0) {}

  /// Returns a step with sufficient decrease (ok = true), preferably one that
  /// also meets the strong curvature condition.
  Trial run(double initial_step) {
    Trial prev{0.0, f0_, slope0_, x0_, {}, true};
    double step = initial_step;
    for (int i = 0; evals_ < opt_.max_line_search_evals; ++i) {
      Trial cur = probe(step);
      if (!cur.ok || armijo_fails(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur);
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope >= 0) return zoom(cur, prev);
      prev = std::move(cur);
      step *= 2;
    }
    // Every probe kept decreasing; prev satisfies sufficient decrease.
    if (prev.step > 0) return prev;
    return Trial{};
  }

 private:
  Trial probe(double step) {
    ++evals_;
    Trial t;
    t.step = step;
    t.x = x0_ + step * p_;
    t.ok = eval_(t.x, t.f, t.g);
    t.slope = t.ok ? t.g.dot(p_) : kInf;
    return t;
  }

  bool armijo_fails(const Trial& t) const { return t.f > f0_ + opt_.c1 * t.step * slope0_; }

  Trial zoom(Trial lo, Trial hi) {
    while (evals_ < opt_.max_line_search_evals) {
      const double a = std::min(lo.step, hi.step), b = std::max(lo.step, hi.step);
      const double width = b - a;
      if (width <= 1e-14 * std::max(1.0, b)) break;
      double step = std::numeric_limits<double>::quiet_NaN();
      if (hi.ok) step = cubic_minimizer(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
      if (!std::isfinite(step) || step < a + 0.1 * width || step > b - 0.1 * width) {
        step = 0.5 * (lo.step + hi.step);
      }
      Trial cur = probe(step);
      if (!cur.ok || armijo_fails(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
        if (cur.slope * (hi.step - lo.step) >= 0) hi = lo;
        lo = std::move(cur);
      }
    }
    if (lo.step > 0) return lo;
    return Trial{};
  }

  Evaluator& eval_;
  const MinimizeOptions& opt_;
  const Eigen::VectorXd& x0_;
  double f0_;
  const Eigen::VectorXd& p_;
  double slope0_;
  int evals_ = 0;
};

// First trial along -g moves no coordinate by more than initial_step; the
// line search extrapolates from there if the slope stays steep.
double steepest_step(const Eigen::VectorXd& g, const MinimizeOptions& opt) {
  return std::min(1.0, opt.initial_step / g.lpNorm<Eigen::Infinity>());
}

}  // namespace

MinimizeResult minimize(const Objective& objective, const Eigen::VectorXd& theta0,
                        const MinimizeOptions& options) {
  MinimizeResult result;
  Evaluator eval(objective, result);

  Eigen::VectorXd x = theta0, g;
  double f = kInf;
  if (!eval(x, f, g)) throw NumericalError("objective failed at the starting point");
  result.initial_value = f;
  result.theta = x;
  result.value = f;
  if (options.max_iterations <= 0) return result;
  if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
    result.converged = true;
    return result;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int k = 0; k < options.max_iterations; ++k) {
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> a(m);
    for (std::size_t i = m; i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Eigen::VectorXd p = -q;
    double slope = g.dot(p);
    bool steepest = m == 0;
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      slope = -g.squaredNorm();
      steepest = true;
    }

    double step0 = steepest ? steepest_step(g, options) : 1.0;
    Trial t = WolfeSearch(eval, options, x, f, p, slope).run(step0);
    if (!t.ok && !steepest) {
      // Retry once along the gradient with fresh curvature information.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      slope = -g.squaredNorm();
      t = WolfeSearch(eval, options, x, f, p, slope).run(steepest_step(g, options));
    }
    if (!t.ok) break;

    Eigen::VectorXd s = t.x - x;
    Eigen::VectorXd y = t.g - g;
    double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double f_old = f;
    x = std::move(t.x);
    g = std::move(t.g);
    f = t.f;
    result.iterations = k + 1;
    result.theta = x;
    result.value = f;

    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance ||
        std::abs(f_old - f) <=
            options.relative_tolerance * std::max({std::abs(f_old), std::abs(f), 1.0})) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace covevo
