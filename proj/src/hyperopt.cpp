#include "covevo/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <numbers>

#include <Eigen/QR>

#include "covevo/gp.hpp"

namespace covevo {

std::optional<double> dominant_period(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n < 8 || y.size() != n) return std::nullopt;
  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double span = sorted.back() - sorted.front();
  std::vector<double> gaps;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] > sorted[i - 1]) gaps.push_back(sorted[i] - sorted[i - 1]);
  }
  if (gaps.size() < 7 || !(span > 0)) return std::nullopt;
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  const double spacing = *mid;

  // Quadratic detrend on centred, scaled inputs.
  const Eigen::ArrayXd t = (x.array() - x.mean()) / span;
  Eigen::MatrixXd design(n, 3);
  design.col(0).setOnes();
  design.col(1) = t.matrix();
  design.col(2) = t.square().matrix();
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
  const Eigen::ArrayXd r = (y - design * coef).array();

  const double f_lo = 3.0 / span, f_hi = 0.5 / spacing;
  if (!(f_hi > f_lo)) return std::nullopt;
  const double df = 0.1 / span;
  const auto count = static_cast<Eigen::Index>(std::ceil((f_hi - f_lo) / df)) + 1;
  Eigen::ArrayXd power(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const double w = 2 * std::numbers::pi * (f_lo + static_cast<double>(k) * df);
    const Eigen::ArrayXd wx = w * x.array();
    const double tau = std::atan2((2 * wx).sin().sum(), (2 * wx).cos().sum()) / (2 * w);
    const Eigen::ArrayXd c = (wx - w * tau).cos(), s = (wx - w * tau).sin();
    const double cc = c.square().sum(), ss = s.square().sum();
    const double pc = cc > 0 ? std::pow((r * c).sum(), 2) / cc : 0.0;
    const double ps = ss > 0 ? std::pow((r * s).sum(), 2) / ss : 0.0;
    power[k] = 0.5 * (pc + ps);
  }
  Eigen::Index best = 0;
  power.maxCoeff(&best);
  if (!(power[best] > 0)) return std::nullopt;
  double f = f_lo + static_cast<double>(best) * df;
  if (best > 0 && best + 1 < count) {
    // Parabola through the peak and its neighbours.
    const double a = power[best - 1], b = power[best], c = power[best + 1];
    const double denom = a - 2 * b + c;
    if (denom < 0) f += 0.5 * (a - c) / denom * df;
  }
  return 1.0 / f;
}

InitScales InitScales::from_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  InitScales s;
  const Eigen::Index n = X.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((X.row(i) - X.row(j)).norm());
  }
  double median = 1.0;
  if (!dists.empty()) {
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    if (*mid > 0) median = *mid;
  }
  double sd = 1.0;
  if (y.size() > 1) {
    double v = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
    if (v > 0) sd = std::sqrt(v);
  }
  s.log_length = std::log(median);
  s.log_amplitude = std::log(sd);
  s.log_noise = std::log(0.1 * sd);
  if (X.cols() == 1) {
    if (auto p = dominant_period(X.col(0), y)) s.log_period = std::log(*p);
  }
  return s;
}

Eigen::VectorXd draw_initial_theta(const KernelExpr& expr, const InitScales& scales, Rng& rng,
                                   bool period_centre) {
  std::normal_distribution<double> normal(0.0, scales.spread);
  const double len = scales.log_length, amp = scales.log_amplitude;
  std::vector<double> out;
  for (const auto& info : preorder_nodes(expr)) {
    const auto& n = info.node;
    if (n.kind() == NodeKind::Scale) {
      out.push_back(normal(rng));
      continue;
    }
    if (n.kind() != NodeKind::Terminal) continue;
    switch (n.terminal_kind()) {
      case TerminalKind::SE:
      case TerminalKind::Matern1:
      case TerminalKind::Matern3:
      case TerminalKind::Matern5:
        out.push_back(len + normal(rng));
        out.push_back(amp + normal(rng));
        break;
      case TerminalKind::RQ:
        out.push_back(len + normal(rng));
        out.push_back(amp + normal(rng));
        out.push_back(normal(rng));
        break;
      case TerminalKind::Periodic:
        // The periodic ell acts on sin(pi r / p), so it is unitless like p's offset.
        out.push_back(normal(rng));
        out.push_back(normal(rng));
        if (period_centre && scales.log_period) out.back() = *scales.log_period;
        out.push_back(amp + normal(rng));
        break;
      case TerminalKind::Linear:
        out.push_back(len + normal(rng));
        break;
      case TerminalKind::Constant:
      case TerminalKind::Noise:
        out.push_back(amp + normal(rng));
        break;
    }
  }
  out.push_back(scales.log_noise + normal(rng));
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

OptResult ml2_fit(const KernelExpr& expr, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Ml2Options& options) {
  NllObjective objective(expr, X, y);
  const InitScales scales = options.scales ? *options.scales : InitScales::from_data(X, y);
  MinimizeOptions mopt = options.minimizer;
  mopt.max_iterations = options.iterations;

  Objective fn = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return objective.evaluate(theta, &grad);
  };

  OptResult best;
  best.nll = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(r), 0x6d6c32));
    Eigen::VectorXd theta0 = draw_initial_theta(expr, scales, rng, r % 2 == 0);
    MinimizeResult res;
    try {
      res = minimize(fn, theta0, mopt);
    } catch (const NumericalError&) {
      ++best.failures;
      best.evaluations += 1;
      continue;
    }
    best.evaluations += res.evaluations;
    if (res.value < best.nll) {
      best.theta = res.theta;
      best.nll = res.value;
      best.initial_nll = res.initial_value;
      best.iterations = res.iterations;
      best.restart = r;
      best.converged = res.converged;
    }
  }
  if (best.restart < 0) {
    throw AllRestartsFailed("all " + std::to_string(options.restarts) +
                            " restarts failed for " + format_expr(expr));
  }
  return best;
}

OptResult ml2_fit(const KernelExpr& expr, const Dataset& data, const Ml2Options& options) {
  return ml2_fit(expr, data.train_X(), data.train_y(), options);
}

}  // namespace covevo
