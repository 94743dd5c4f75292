#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "covevo/result_record.hpp"
#include "support.hpp"

using namespace covevo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("covevo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  // Small 1-D CSV with a train/test split.
  std::string small_csv() {
    std::ofstream f(path("small.csv"));
    f << "x,y,split\n";
    for (int i = 0; i < 30; ++i) {
      const double x = i * 0.25;
      f << x << ',' << std::sin(x) + 0.1 * x << ',' << (i < 24 ? "train" : "test") << '\n';
    }
    return path("small.csv");
  }

  fs::path dir;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, cli::kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(cli({"fit", "--kernel", "SE"}).code, cli::kExitUsage);  // no data
  EXPECT_EQ(cli({"synth", "--name", "se+linear", "--out", path("x.csv")}).code, cli::kExitUsage);
  auto missing = cli({"baseline", "--data", path("missing.csv")});
  EXPECT_EQ(missing.code, cli::kExitUsage);
  EXPECT_NE(missing.err, "");
  EXPECT_EQ(cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, SynthIsDeterministic) {
  auto a = cli({"synth", "--name", "se+rq", "--seed", "7", "--out", path("a.csv")});
  auto b = cli({"synth", "--name", "se+rq", "--seed", "7", "--out", path("b.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(count_lines(path("a.csv")), 883);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(cli({"synth", "--name", "SE+Periodic", "--desk", "--out", path("d.csv")}).code, 0);
  EXPECT_EQ(count_lines(path("d.csv")), 442);
}

TEST_F(CliTest, FitWritesRecordAndPlot) {
  auto csv = small_csv();
  auto r = cli({"fit", "--data", csv, "--kernel", "(Sum SE Linear)", "--restarts", "2", "--iterations", "20",
                "--out", path("rec.json"), "--plot", path("plot.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("train_nll"), std::string::npos);
  auto rec = load_record(path("rec.json"));
  EXPECT_EQ(rec.command, "fit");
  EXPECT_EQ(rec.kernel, "(Sum SE Linear)");
  EXPECT_EQ(rec.train_count, 24);
  EXPECT_TRUE(rec.test_pearson);
  EXPECT_EQ(count_lines(path("plot.csv")), 31);
  EXPECT_EQ(slurp(path("plot.csv")).substr(0, 40), "x,actual,mean,variance,lower,upper,split");
}

TEST_F(CliTest, FitConstantAndBadKernel) {
  auto csv = small_csv();
  auto ok = cli({"fit", "--data", csv, "--kernel", "Constant", "--restarts", "1", "--out", path("c.json")});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_TRUE(std::isfinite(load_record(path("c.json")).train_nll));
  auto bad = cli({"fit", "--data", csv, "--kernel", "(Sum SE", "--out", path("b.json")});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_NE(bad.err.find("offset"), std::string::npos);
  auto mask = cli({"fit", "--data", csv, "--kernel", "(Mask [1 0] SE)", "--out", path("m.json")});
  EXPECT_EQ(mask.code, cli::kExitUsage);
}

TEST_F(CliTest, PredictRoundTrip) {
  auto csv = small_csv();
  ASSERT_EQ(cli({"fit", "--data", csv, "--kernel", "SE", "--restarts", "1", "--out", path("r.json"), "--plot",
                 path("fit_plot.csv")})
                .code,
            0);
  auto p = cli({"predict", "--record", path("r.json"), "--data", csv, "--out", path("p.csv")});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(count_lines(path("p.csv")), 31);
  EXPECT_EQ(slurp(path("p.csv")), slurp(path("fit_plot.csv")));
  ASSERT_EQ(cli({"predict", "--record", path("r.json"), "--data", csv, "--out", path("p2.csv")}).code, 0);
  EXPECT_EQ(slurp(path("p.csv")), slurp(path("p2.csv")));
  std::ofstream(path("junk.json")) << "{not json";
  EXPECT_EQ(cli({"predict", "--record", path("junk.json"), "--data", csv}).code, cli::kExitUsage);
}

TEST_F(CliTest, PredictNearInterpolatesWithTinyNoise) {
  auto csv = small_csv();
  ASSERT_EQ(cli({"fit", "--data", csv, "--kernel", "SE", "--restarts", "2", "--out", path("r.json")}).code, 0);
  auto rec = load_record(path("r.json"));
  rec.theta[rec.theta.size() - 1] = -12;  // pin the noise near zero
  save_record(rec, path("r0.json"));
  ASSERT_EQ(cli({"predict", "--record", path("r0.json"), "--data", csv, "--out", path("p.csv")}).code, 0);
  std::ifstream in(path("p.csv"));
  std::string line;
  std::getline(in, line);
  int checked = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string x, actual, mean, rest;
    std::getline(ss, x, ',');
    std::getline(ss, actual, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, rest);
    if (rest.find("train") == std::string::npos) continue;
    EXPECT_NEAR(std::stod(mean), std::stod(actual), 1e-4);
    ++checked;
  }
  EXPECT_EQ(checked, 24);
}

TEST_F(CliTest, BaselineKernelsOnSynthetic) {
  auto r = cli({"baseline", "--synthetic", "se+rq", "--desk", "--restarts", "1", "--iterations", "10", "--out",
                path("table.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(path("table.csv")), 6);
  EXPECT_NE(slurp(path("table.csv")).find("Optimal"), std::string::npos);
}

TEST_F(CliTest, BaselineRandomSearchHonoursBudget) {
  auto csv = small_csv();
  auto r = cli({"baseline", "--data", csv, "--mode", "random-search", "--budget", "12", "--out", path("rs"),
                "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rec = load_record(path("rs/result.json"));
  EXPECT_EQ(rec.command, "random-search");
  EXPECT_EQ(rec.evaluations, 12);
  EXPECT_EQ(count_lines(path("rs/evaluations.csv")), 13);
}

TEST_F(CliTest, EvolveWritesAllOutputsAndIsDeterministic) {
  auto csv = small_csv();
  std::ofstream(path("run.cfg")) << "covevo-config 1\n"
                                 << "data.path = small.csv\n"
                                 << "evolution.population_size = 6\n"
                                 << "evolution.max_generations = 2\n"
                                 << "evolution.ml2_iterations = 8\n"
                                 << "evolution.restarts = 1\n"
                                 << "evolution.final_restarts = 2\n"
                                 << "evolution.max_selection_pressure = 3\n"
                                 << "evolution.max_length = 10\n";
  auto a = cli({"evolve", "--config", path("run.cfg"), "--out", path("a"), "--workers", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = cli({"evolve", "--config", path("run.cfg"), "--out", path("b"), "--workers", "2"});
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"result.json", "history.csv", "evaluations.csv", "plot.csv"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  EXPECT_EQ(slurp(dir / "a" / "history.csv"), slurp(dir / "b" / "history.csv"));
  EXPECT_EQ(slurp(dir / "a" / "evaluations.csv"), slurp(dir / "b" / "evaluations.csv"));
  auto ra = load_record((dir / "a" / "result.json").string());
  auto rb = load_record((dir / "b" / "result.json").string());
  EXPECT_EQ(ra.kernel, rb.kernel);
  EXPECT_EQ(ra.train_nll, rb.train_nll);
  EXPECT_EQ(ra.command, "evolve");
  EXPECT_LE(ra.history.size(), 2u);
  EXPECT_EQ(count_lines(dir / "a" / "history.csv"), static_cast<int>(ra.history.size()) + 1);
  EXPECT_FALSE(ra.config.contains("evolution.workers"));
  EXPECT_EQ(ra.config["evolution.population_size"], "6");
}

TEST_F(CliTest, EvolveRejectsBadConfig) {
  std::ofstream(path("bad.cfg")) << "covevo-config 1\nevolution.bogus = 1\n";
  auto r = cli({"evolve", "--config", path("bad.cfg")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(cli({"evolve", "--config", path("none.cfg")}).code, cli::kExitUsage);
}

}  // namespace
