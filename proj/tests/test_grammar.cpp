#include <map>
#include <set>

#include <gtest/gtest.h>

#include "covevo/grammar.hpp"
#include "support.hpp"

using namespace covevo;

namespace {

GrammarConfig grammar(int dim) {
  GrammarConfig g;
  g.dim = dim;
  return g;
}

bool within_limits(const KernelExpr& e, const GrammarConfig& g) {
  auto m = expr_metrics(e);
  return m.length <= g.limits.max_length && m.height <= g.limits.max_height &&
         is_valid_expr(e, g.dim, g.limits);
}

TEST(Ptc2, TargetOneGivesTerminal) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(ptc2(grammar(2), 1, rng).kind(), NodeKind::Terminal);
}

TEST(Ptc2, RespectsLimitsAndTarget) {
  Rng rng(2);
  for (int dim : {1, 2, 3}) {
    auto g = grammar(dim);
    for (int i = 0; i < 1000; ++i) {
      const int target = uniform_int(rng, 1, 25);
      auto e = ptc2(g, target, rng);
      EXPECT_TRUE(within_limits(e, g)) << format_expr(e);
      EXPECT_LE(expr_metrics(e).length, target);
    }
  }
}

TEST(Ptc2, EveryTerminalAndOperatorAppears) {
  Rng rng(3);
  auto g = grammar(2);
  std::set<std::string> seen;
  std::function<void(const KernelExpr&)> walk = [&](const KernelExpr& e) {
    if (e.kind() == NodeKind::Terminal) {
      seen.insert(std::string(terminal_name(e.terminal_kind())));
    } else {
      seen.insert(std::to_string(static_cast<int>(e.kind())));
    }
    for (const auto& c : e.children()) walk(c);
  };
  for (int i = 0; i < 1000; ++i) walk(ptc2(g, 25, rng));
  for (auto t : kAllTerminals) EXPECT_TRUE(seen.count(std::string(terminal_name(t)))) << terminal_name(t);
  EXPECT_EQ(seen.size(), kTerminalCount + 4);
}

TEST(Ptc2, MeanLengthTracksTarget) {
  Rng rng(4);
  auto g = grammar(2);
  for (int target = 5; target <= 25; target += 5) {
    double total = 0;
    for (int i = 0; i < 400; ++i) total += expr_metrics(ptc2(g, target, rng)).length;
    const double mean = total / 400;
    EXPECT_GT(mean, 0.7 * target) << target;
    EXPECT_LT(mean, 1.3 * target) << target;
  }
}

TEST(Ptc2, DeterministicPerSeed) {
  auto g = grammar(2);
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_TRUE(ptc2(g, 20, s) == ptc2(g, 20, s));
}

TEST(Crossover, IdenticalParentsStayValid) {
  auto g = grammar(1);
  auto p = parse_expr("(Sum SE RQ)", 1);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    auto c = subtree_crossover(p, p, g, rng);
    EXPECT_TRUE(within_limits(c, g));
    for (auto e : {c}) {
      std::function<void(const KernelExpr&)> walk = [&](const KernelExpr& x) {
        if (x.kind() == NodeKind::Terminal)
          EXPECT_TRUE(x.terminal_kind() == TerminalKind::SE || x.terminal_kind() == TerminalKind::RQ);
        for (const auto& k : x.children()) walk(k);
      };
      walk(e);
    }
  }
}

TEST(Crossover, MasksKeepTheirLength) {
  auto g = grammar(2);
  auto a = parse_expr("(Mask [1 0] SE)", 2), b = parse_expr("(Mask [0 1] RQ)", 2);
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    auto c = subtree_crossover(a, b, g, rng);
    EXPECT_TRUE(is_valid_expr(c, 2, g.limits)) << format_expr(c);
  }
}

TEST(Crossover, ClosureOnRandomParents) {
  Rng rng(7);
  auto g = grammar(3);
  for (int i = 0; i < 10000; ++i) {
    auto a = random_expr(g, rng), b = random_expr(g, rng);
    auto c = subtree_crossover(a, b, g, rng);
    ASSERT_TRUE(within_limits(c, g)) << format_expr(c);
  }
}

TEST(Crossover, DeterministicPerSeed) {
  auto g = grammar(2);
  auto a = ptc2(g, 20, std::uint64_t{1}), b = ptc2(g, 20, std::uint64_t{2});
  for (std::uint64_t s = 0; s < 50; ++s)
    EXPECT_TRUE(subtree_crossover(a, b, g, s) == subtree_crossover(a, b, g, s));
}

TEST(Mutation, ReplaceTerminalChangesKind) {
  Rng rng(8);
  auto se = parse_expr("SE", 1);
  for (int i = 0; i < 100; ++i) {
    auto m = mutate_with(se, MutationOp::ReplaceTerminal, grammar(1), rng);
    ASSERT_EQ(m.kind(), NodeKind::Terminal);
    EXPECT_NE(m.terminal_kind(), TerminalKind::SE);
  }
}

TEST(Mutation, FlipMaskBitFlipsOneBit) {
  Rng rng(9);
  auto e = parse_expr("(Mask [1 0] SE)", 2);
  std::set<std::string> out;
  for (int i = 0; i < 100; ++i) out.insert(format_expr(mutate_with(e, MutationOp::FlipMaskBit, grammar(2), rng)));
  EXPECT_EQ(out, (std::set<std::string>{"(Mask [0 0] SE)", "(Mask [1 1] SE)"}));
}

TEST(Mutation, WrapScaleFallsBackAtTheLimit) {
  Rng rng(10);
  auto g = grammar(1);
  EXPECT_EQ(format_expr(mutate_with(parse_expr("SE", 1), MutationOp::WrapScale, g, rng)), "(Scale SE)");
  g.limits = {3, 7};
  auto full = parse_expr("(Sum SE RQ)", 1);
  auto m = mutate_with(full, MutationOp::WrapScale, g, rng);
  EXPECT_EQ(expr_metrics(m).length, 3);
  EXPECT_NE(format_expr(m), "(Sum SE RQ)");
}

TEST(Mutation, ClosureOnRandomTrees) {
  Rng rng(11);
  for (int dim : {1, 2, 3}) {
    auto g = grammar(dim);
    std::map<int, int> changed;
    for (int i = 0; i < 4000; ++i) {
      auto e = random_expr(g, rng);
      auto op = static_cast<MutationOp>(i % 4);
      auto m = mutate_with(e, op, g, rng);
      ASSERT_TRUE(within_limits(m, g)) << format_expr(m);
      if (!(m == e)) ++changed[i % 4];
      ASSERT_TRUE(within_limits(mutate(e, g, rng), g));
    }
    for (int op = 0; op < 4; ++op) EXPECT_GT(changed[op], 500) << op;
  }
}

TEST(Mutation, DeterministicPerSeed) {
  auto g = grammar(2);
  auto e = ptc2(g, 15, std::uint64_t{3});
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_TRUE(mutate(e, g, s) == mutate(e, g, s));
}

TEST(GrammarConfig, Validation) {
  GrammarConfig g;
  g.dim = 0;
  EXPECT_THROW(g.validate(), Error);
  g = GrammarConfig{};
  g.terminals.clear();
  EXPECT_THROW(g.validate(), Error);
  g = GrammarConfig{};
  g.terminal_weights = {1.0};
  EXPECT_THROW(g.validate(), Error);
  g = GrammarConfig{};
  g.min_arity = 3;
  g.max_arity = 2;
  EXPECT_THROW(g.validate(), Error);
}

}  // namespace
