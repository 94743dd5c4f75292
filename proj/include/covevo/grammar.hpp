#pragma once

// Generation and variation of covariance expressions. Every operator returns
// a tree that is derivable from the covariance grammar and respects the
// configured length/height limits.

#include <cstdint>
#include <vector>

#include "covevo/kernel_expr.hpp"
#include "covevo/random.hpp"

namespace covevo {

struct GrammarConfig {
  int dim = 1;
  ExprLimits limits{};
  std::vector<TerminalKind> terminals{std::begin(kAllTerminals), std::end(kAllTerminals)};
  std::vector<NodeKind> operators{NodeKind::Sum, NodeKind::Prod, NodeKind::Scale, NodeKind::Mask};
  std::vector<double> terminal_weights;  // empty = uniform
  std::vector<double> operator_weights;  // empty = uniform
  int min_arity = 2;                     // Sum/Prod arity drawn in [min_arity, max_arity]
  int max_arity = 3;
  double internal_crossover_prob = 0.9;

  /// Throws Error on an inconsistent configuration.
  void validate() const;
};

/// Probabilistic tree creation (PTC2): expands uniformly chosen open slots
/// with operators while the size budget allows, then closes the remaining
/// slots with terminals. Result length is in [1, target_length].
KernelExpr ptc2(const GrammarConfig& config, int target_length, Rng& rng);
KernelExpr ptc2(const GrammarConfig& config, int target_length, std::uint64_t seed);

/// PTC2 with target length drawn uniformly from [1, max_length].
KernelExpr random_expr(const GrammarConfig& config, Rng& rng);

KernelExpr subtree_crossover(const KernelExpr& p1, const KernelExpr& p2,
                             const GrammarConfig& config, Rng& rng);
KernelExpr subtree_crossover(const KernelExpr& p1, const KernelExpr& p2,
                             const GrammarConfig& config, std::uint64_t seed);

enum class MutationOp { ReplaceTerminal, FlipMaskBit, ReplaceSubtree, WrapScale };

/// Applies one operator chosen uniformly at random.
KernelExpr mutate(const KernelExpr& expr, const GrammarConfig& config, Rng& rng);
KernelExpr mutate(const KernelExpr& expr, const GrammarConfig& config, std::uint64_t seed);
/// Applies the given operator (falling back to ReplaceTerminal where it does not apply).
KernelExpr mutate_with(const KernelExpr& expr, MutationOp op, const GrammarConfig& config,
                       Rng& rng);

}  // namespace covevo
