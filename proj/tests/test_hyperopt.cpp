#include <cmath>

#include <gtest/gtest.h>

#include "covevo/datasets.hpp"
#include "covevo/gp.hpp"
#include "covevo/hyperopt.hpp"
#include "covevo/lbfgs.hpp"
#include "support.hpp"

using namespace covevo;
using namespace covevo::testing;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const double a = 1 - x[0], b = x[1] - x[0] * x[0];
  g.resize(2);
  g[0] = -2 * a - 400 * x[0] * b;
  g[1] = 200 * b;
  return a * a + 100 * b * b;
}

TEST(Minimize, ExactQuadratic) {
  Eigen::VectorXd c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x - c;
    return 0.5 * g.squaredNorm();
  };
  MinimizeOptions opt;
  opt.gradient_tolerance = 1e-10;
  auto r = minimize(f, Eigen::VectorXd::Zero(4), opt);
  EXPECT_LT((r.theta - c).norm(), 1e-8);
  EXPECT_LE(r.iterations, 4 + 5);
  EXPECT_TRUE(r.converged);
}

TEST(Minimize, Rosenbrock) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  MinimizeOptions opt;
  opt.max_iterations = 200;
  opt.gradient_tolerance = 1e-9;
  opt.relative_tolerance = 0;
  auto r = minimize(rosenbrock, x0, opt);
  EXPECT_LT((r.theta - Eigen::Vector2d(1, 1)).norm(), 1e-4);
  EXPECT_LT(r.iterations, 200);
}

TEST(Minimize, ZeroIterationsReturnsStart) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  MinimizeOptions opt;
  opt.max_iterations = 0;
  auto r = minimize(rosenbrock, x0, opt);
  EXPECT_EQ(r.theta, x0);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.value, r.initial_value);
}

TEST(Minimize, SurvivesFailingRegions) {
  // undefined for x >= 1, minimum approached at the wall from the left
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    if (x[0] >= 1) throw NumericalError("outside domain");
    g.resize(1);
    g[0] = 2 * (x[0] - 3);
    return (x[0] - 3) * (x[0] - 3);
  };
  auto r = minimize(f, Eigen::VectorXd::Zero(1));
  EXPECT_LT(r.value, 9.0);
  EXPECT_LT(r.theta[0], 1.0);
  EXPECT_GT(r.failed_evaluations, 0);
}

TEST(Minimize, ThrowsWhenStartFails) {
  auto f = [](const Eigen::VectorXd&, Eigen::VectorXd&) -> double { return std::nan(""); };
  EXPECT_THROW(minimize(f, Eigen::VectorXd::Zero(1)), NumericalError);
}

TEST(Minimize, NeverAboveStart) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x0 = normal_vector(2, rng, 0, 2);
    MinimizeOptions opt;
    opt.max_iterations = uniform_int(rng, 1, 10);
    Eigen::VectorXd g;
    const double f0 = rosenbrock(x0, g);
    auto r = minimize(rosenbrock, x0, opt);
    EXPECT_LE(r.value, f0);
    EXPECT_EQ(r.initial_value, f0);
  }
}

Dataset se_sample(int n, std::uint64_t seed) {
  Dataset d;
  d.X = Eigen::VectorXd::LinSpaced(n, 0.0, 20.0);
  Eigen::VectorXd theta(3);
  theta << 0.0, 0.0, std::log(0.1);
  d.y = sample_prior(parse_expr("SE", 1), theta, d.X, seed);
  Rng rng(seed);
  d.y += normal_vector(n, rng, 0.0, 0.1);
  d.columns = {"x"};
  for (int i = 0; i < n; ++i) d.train.push_back(i);
  return d;
}

TEST(Ml2Fit, RecoversLengthScale) {
  Dataset d = se_sample(200, 17);
  Ml2Options opt;
  opt.restarts = 3;
  opt.iterations = 50;
  opt.seed = 1;
  auto r = ml2_fit(parse_expr("SE", 1), d, opt);
  EXPECT_NEAR(r.theta[0], 0.0, 0.3);
  EXPECT_LE(r.nll, r.initial_nll);
  EXPECT_TRUE(std::isfinite(r.nll));
}

TEST(Ml2Fit, ConstantDataDrivesAmplitudeDown) {
  Dataset d;
  d.X = Eigen::VectorXd::LinSpaced(30, 0.0, 1.0);
  d.y = Eigen::VectorXd::Constant(30, 4.0);
  d.columns = {"x"};
  for (int i = 0; i < 30; ++i) d.train.push_back(i);
  Ml2Options opt;
  opt.seed = 2;
  auto r = ml2_fit(parse_expr("Constant", 1), d, opt);
  // zero-variance targets: draws are centred on unit amplitude and 0.1 noise
  EXPECT_LT(r.nll, r.initial_nll);
  EXPECT_LT(r.theta[0], -1.0);
  EXPECT_LT(r.theta[1], std::log(0.1) - 1.0);
}

TEST(Ml2Fit, DeterministicAndPrefixMonotone) {
  Dataset d = se_sample(60, 5);
  auto e = parse_expr("(Sum RQ Periodic)", 1);
  Ml2Options opt;
  opt.seed = 9;
  opt.iterations = 20;
  double previous = std::numeric_limits<double>::infinity();
  for (int restarts = 1; restarts <= 4; ++restarts) {
    opt.restarts = restarts;
    auto a = ml2_fit(e, d, opt);
    auto b = ml2_fit(e, d, opt);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.nll, b.nll);
    EXPECT_LE(a.nll, previous);
    previous = a.nll;
    EXPECT_LE(a.evaluations, restarts * (opt.iterations * opt.minimizer.max_line_search_evals + 1));
  }
}

TEST(Ml2Fit, RestartsFailWhenKernelIsUnusable) {
  Dataset d = se_sample(10, 1);
  Ml2Options opt;
  opt.scales = InitScales::from_data(d.train_X(), d.train_y());
  opt.scales->log_amplitude = 1e6;  // every draw overflows
  opt.scales->log_noise = 1e6;
  EXPECT_THROW(ml2_fit(parse_expr("Constant", 1), d, opt), AllRestartsFailed);
}

TEST(InitScales, FromData) {
  Eigen::MatrixXd X(4, 1);
  X << 0, 1, 2, 4;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  auto s = InitScales::from_data(X, y);
  // pairwise distances 1 2 4 1 3 2: median 2
  EXPECT_NEAR(s.log_length, std::log(2.0), 1e-12);
  EXPECT_NEAR(s.log_amplitude, 0.5 * std::log(5.0 / 3.0), 1e-12);  // sample standard deviation
  EXPECT_NEAR(s.log_noise, s.log_amplitude + std::log(0.1), 1e-12);
}

TEST(DominantPeriod, FindsSeasonalCycle) {
  const int n = 240;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 1990.0 + i / 12.0;
    y[i] = 0.02 * (x[i] - 1990) * (x[i] - 1990) + 3 * std::sin(2 * std::numbers::pi * x[i] / 1.0);
  }
  auto p = dominant_period(x, y);
  ASSERT_TRUE(p);
  EXPECT_NEAR(*p, 1.0, 0.01);
  Eigen::VectorXd two(2);
  two << 0.0, 1.0;
  EXPECT_FALSE(dominant_period(two, two));
}

TEST(DominantPeriod, Co2IsAnnual) {
  Dataset d = load_co2(co2_path());
  auto p = dominant_period(d.train_X().col(0), d.train_y());
  ASSERT_TRUE(p);
  EXPECT_NEAR(*p, 1.0, 0.01);
}

TEST(DrawInitialTheta, PeriodCentreOnlyMovesPeriods) {
  auto e = parse_expr("(Sum SE (Prod Periodic RQ) Periodic)", 1);
  InitScales s;
  s.log_period = 0.25;
  Rng a(4), b(4);
  auto plain = draw_initial_theta(e, s, a, false);
  auto centred = draw_initial_theta(e, s, b, true);
  ParamLayout layout(e);
  std::vector<int> period_slots;
  for (const auto& slice : layout.slices())
    for (int k = 0; k < slice.count; ++k)
      if (slice.names[k] == "log_p") period_slots.push_back(slice.offset + k);
  ASSERT_EQ(period_slots.size(), 2u);
  for (Eigen::Index i = 0; i < plain.size(); ++i) {
    if (std::find(period_slots.begin(), period_slots.end(), i) != period_slots.end()) {
      EXPECT_EQ(centred[i], 0.25);
    } else {
      EXPECT_EQ(centred[i], plain[i]);
    }
  }
}

}  // namespace
