#include "covevo/grammar.hpp"

#include <algorithm>
#include <numeric>

namespace covevo {

void GrammarConfig::validate() const {
  if (dim < 1) throw Error("grammar dimension must be >= 1");
  if (limits.max_length < 1 || limits.max_height < 1) throw Error("limits must be >= 1");
  if (terminals.empty()) throw Error("grammar needs at least one terminal");
  if (!terminal_weights.empty() && terminal_weights.size() != terminals.size())
    throw Error("terminal weights do not match terminals");
  if (!operator_weights.empty() && operator_weights.size() != operators.size())
    throw Error("operator weights do not match operators");
  if (min_arity < 1 || max_arity < min_arity) throw Error("invalid Sum/Prod arity range");
}

namespace {

template <class T>
const T& weighted_pick(const std::vector<T>& items, const std::vector<double>& weights, Rng& rng) {
  if (weights.empty()) return items[uniform_int(rng, 0, static_cast<int>(items.size()) - 1)];
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return items[dist(rng)];
}

BitVector random_bits(int dim, Rng& rng) {
  BitVector bits(static_cast<std::size_t>(dim));
  for (auto& b : bits) b = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
  return bits;
}

// Mutable tree used while PTC2 grows the expression.
struct Slot {
  int parent;  // -1 for the root
  int position;
  int depth;
};

struct Draft {
  NodeKind kind = NodeKind::Terminal;
  TerminalKind terminal = TerminalKind::SE;
  BitVector bits;
  std::vector<int> children;
};

int own_cost(NodeKind kind) { return kind == NodeKind::Mask ? 2 : 1; }

KernelExpr build(const std::vector<Draft>& drafts, int index) {
  const auto& d = drafts[index];
  std::vector<KernelExpr> kids;
  for (int c : d.children) kids.push_back(build(drafts, c));
  switch (d.kind) {
    case NodeKind::Terminal:
      return KernelExpr::terminal(d.terminal);
    case NodeKind::Sum:
      return KernelExpr::sum(std::move(kids));
    case NodeKind::Prod:
      return KernelExpr::prod(std::move(kids));
    case NodeKind::Scale:
      return KernelExpr::scale(std::move(kids[0]));
    case NodeKind::Mask:
      return KernelExpr::mask(d.bits, std::move(kids[0]));
  }
  return KernelExpr::terminal(d.terminal);
}

}  // namespace

KernelExpr ptc2(const GrammarConfig& config, int target_length, Rng& rng) {
  config.validate();
  const int target = std::clamp(target_length, 1, config.limits.max_length);
  const int max_height = config.limits.max_height;

  std::vector<Draft> drafts;
  std::vector<Slot> frontier;
  int size_estimate = 1;  // placed nodes plus one terminal per open slot

  auto fill = [&](const Slot& slot, Draft draft) {
    int index = static_cast<int>(drafts.size());
    int arity = static_cast<int>(draft.children.size());
    drafts.push_back(std::move(draft));
    if (slot.parent >= 0) drafts[slot.parent].children[slot.position] = index;
    for (int k = 0; k < arity; ++k) frontier.push_back(Slot{index, k, slot.depth + 1});
  };

  auto terminal_draft = [&] {
    Draft d;
    d.terminal = weighted_pick(config.terminals, config.terminal_weights, rng);
    return d;
  };

  // Chooses an operator that fits the remaining budget at this depth, if any.
  auto operator_draft = [&](const Slot& slot, Draft& out) {
    if (slot.depth + 1 > max_height) return false;
    std::vector<NodeKind> kinds;
    std::vector<double> weights;
    for (std::size_t i = 0; i < config.operators.size(); ++i) {
      NodeKind k = config.operators[i];
      int min_children = (k == NodeKind::Sum || k == NodeKind::Prod) ? config.min_arity : 1;
      if (size_estimate - 1 + own_cost(k) + min_children > target) continue;
      kinds.push_back(k);
      weights.push_back(config.operator_weights.empty() ? 1.0 : config.operator_weights[i]);
    }
    if (kinds.empty()) return false;
    NodeKind kind = weighted_pick(kinds, weights, rng);
    int arity = 1;
    if (kind == NodeKind::Sum || kind == NodeKind::Prod) {
      int max_fit = target - (size_estimate - 1 + own_cost(kind));
      arity = uniform_int(rng, config.min_arity, std::min(config.max_arity, max_fit));
    }
    out = Draft{};
    out.kind = kind;
    out.children.assign(static_cast<std::size_t>(arity), -1);
    if (kind == NodeKind::Mask) out.bits = random_bits(config.dim, rng);
    size_estimate += own_cost(kind) + arity - 1;
    return true;
  };

  Slot root{-1, 0, 1};
  Draft first;
  if (target > 1 && operator_draft(root, first)) {
    fill(root, std::move(first));
    while (!frontier.empty() && size_estimate < target) {
      int pick = uniform_int(rng, 0, static_cast<int>(frontier.size()) - 1);
      Slot slot = frontier[pick];
      frontier.erase(frontier.begin() + pick);
      Draft d;
      if (!operator_draft(slot, d)) d = terminal_draft();
      fill(slot, std::move(d));
    }
    while (!frontier.empty()) {
      Slot slot = frontier.back();
      frontier.pop_back();
      fill(slot, terminal_draft());
    }
  } else {
    fill(root, terminal_draft());
  }
  return build(drafts, 0);
}

KernelExpr ptc2(const GrammarConfig& config, int target_length, std::uint64_t seed) {
  Rng rng(seed);
  return ptc2(config, target_length, rng);
}

KernelExpr random_expr(const GrammarConfig& config, Rng& rng) {
  int target = uniform_int(rng, 1, config.limits.max_length);
  return ptc2(config, target, rng);
}

namespace {

// Preorder index of a crossover point: internal nodes with probability
// `internal_prob` when the tree has any, otherwise a leaf.
int pick_crossover_point(const std::vector<NodeInfo>& nodes, double internal_prob, Rng& rng) {
  std::vector<int> internal, leaves;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    (nodes[i].node.kind() == NodeKind::Terminal ? leaves : internal).push_back(i);
  }
  const auto& pool = (!internal.empty() && uniform01(rng) < internal_prob) ? internal : leaves;
  return pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
}

bool fits(const KernelExpr& e, const GrammarConfig& config) {
  auto m = expr_metrics(e);
  return m.length <= config.limits.max_length && m.height <= config.limits.max_height;
}

}  // namespace

KernelExpr subtree_crossover(const KernelExpr& p1, const KernelExpr& p2,
                             const GrammarConfig& config, Rng& rng) {
  const auto n1 = preorder_nodes(p1);
  const auto n2 = preorder_nodes(p2);
  for (int attempt = 0; attempt < 10; ++attempt) {
    int at = pick_crossover_point(n1, config.internal_crossover_prob, rng);
    int from = pick_crossover_point(n2, config.internal_crossover_prob, rng);
    auto child = replace_subtree(p1, at, n2[from].node);
    if (fits(child, config)) return child;
  }
  return p1;
}

KernelExpr subtree_crossover(const KernelExpr& p1, const KernelExpr& p2,
                             const GrammarConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return subtree_crossover(p1, p2, config, rng);
}

KernelExpr mutate_with(const KernelExpr& expr, MutationOp op, const GrammarConfig& config,
                       Rng& rng) {
  const auto nodes = preorder_nodes(expr);
  const auto metrics = expr_metrics(expr);

  auto replace_terminal = [&] {
    std::vector<int> leaves;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (nodes[i].node.kind() == NodeKind::Terminal) leaves.push_back(i);
    }
    int at = leaves[uniform_int(rng, 0, static_cast<int>(leaves.size()) - 1)];
    TerminalKind old = nodes[at].node.terminal_kind();
    std::vector<TerminalKind> others;
    std::vector<double> weights;
    for (std::size_t i = 0; i < config.terminals.size(); ++i) {
      if (config.terminals[i] == old) continue;
      others.push_back(config.terminals[i]);
      weights.push_back(config.terminal_weights.empty() ? 1.0 : config.terminal_weights[i]);
    }
    if (others.empty()) return expr;
    return replace_subtree(expr, at, KernelExpr::terminal(weighted_pick(others, weights, rng)));
  };

  switch (op) {
    case MutationOp::ReplaceTerminal:
      return replace_terminal();
    case MutationOp::FlipMaskBit: {
      std::vector<int> masks;
      for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        if (nodes[i].node.kind() == NodeKind::Mask && !nodes[i].node.bits().empty())
          masks.push_back(i);
      }
      if (masks.empty()) return replace_terminal();
      int at = masks[uniform_int(rng, 0, static_cast<int>(masks.size()) - 1)];
      const auto& m = nodes[at].node;
      BitVector bits = m.bits();
      auto& bit = bits[uniform_int(rng, 0, static_cast<int>(bits.size()) - 1)];
      bit = static_cast<std::uint8_t>(1 - bit);
      return replace_subtree(expr, at, KernelExpr::mask(std::move(bits), m.children()[0]));
    }
    case MutationOp::ReplaceSubtree: {
      int at = uniform_int(rng, 0, static_cast<int>(nodes.size()) - 1);
      int removed = expr_metrics(nodes[at].node).length;
      GrammarConfig sub = config;
      sub.limits.max_length = config.limits.max_length - (metrics.length - removed);
      sub.limits.max_height = config.limits.max_height - nodes[at].depth + 1;
      if (sub.limits.max_length < 1 || sub.limits.max_height < 1) return replace_terminal();
      auto fresh = random_expr(sub, rng);
      return replace_subtree(expr, at, fresh);
    }
    case MutationOp::WrapScale:
      if (metrics.length + 1 <= config.limits.max_length &&
          metrics.height + 1 <= config.limits.max_height) {
        return KernelExpr::scale(expr);
      }
      return replace_terminal();
  }
  return expr;
}

KernelExpr mutate(const KernelExpr& expr, const GrammarConfig& config, Rng& rng) {
  auto op = static_cast<MutationOp>(uniform_int(rng, 0, 3));
  return mutate_with(expr, op, config, rng);
}

KernelExpr mutate(const KernelExpr& expr, const GrammarConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return mutate(expr, config, rng);
}

}  // namespace covevo
