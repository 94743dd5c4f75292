#pragma once

// Covariance expression trees: the genotype that gets evolved.
//
// A KernelExpr is an immutable, reference-counted tree over
//   Sum(children >= 1) | Prod(children >= 1) | Scale(child) | Mask(bits, child) | Terminal
// Copies are cheap and share structure; every "modification" builds a new tree.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covevo/error.hpp"

namespace covevo {

enum class NodeKind { Sum, Prod, Scale, Mask, Terminal };

enum class TerminalKind { SE, RQ, Matern1, Matern3, Matern5, Periodic, Linear, Constant, Noise };

inline constexpr std::size_t kTerminalCount = 9;
inline constexpr TerminalKind kAllTerminals[kTerminalCount] = {
    TerminalKind::SE,       TerminalKind::RQ,     TerminalKind::Matern1,
    TerminalKind::Matern3,  TerminalKind::Matern5, TerminalKind::Periodic,
    TerminalKind::Linear,   TerminalKind::Constant, TerminalKind::Noise};

using BitVector = std::vector<std::uint8_t>;

std::string_view terminal_name(TerminalKind kind);
/// Number of hyperparameters carried by a terminal of this kind.
int terminal_param_count(TerminalKind kind);

class KernelExpr {
 public:
  static KernelExpr terminal(TerminalKind kind);
  static KernelExpr sum(std::vector<KernelExpr> children);
  static KernelExpr prod(std::vector<KernelExpr> children);
  static KernelExpr scale(KernelExpr child);
  static KernelExpr mask(BitVector bits, KernelExpr child);

  NodeKind kind() const;
  /// Only meaningful when kind() == NodeKind::Terminal.
  TerminalKind terminal_kind() const;
  std::span<const KernelExpr> children() const;
  /// Only non-empty for Mask nodes (a Mask over zero dimensions has empty bits too).
  const BitVector& bits() const;

  /// Parameters owned directly by this node (not its descendants).
  int own_param_count() const;

  friend bool operator==(const KernelExpr& a, const KernelExpr& b);

 private:
  struct Node;
  explicit KernelExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct ExprLimits {
  int max_length = 25;
  int max_height = 7;
};

struct ExprMetrics {
  int length = 0;       // node count; a Mask's bit vector counts as one node
  int height = 0;       // a single terminal has height 1
  int param_count = 0;  // kernel hyperparameters, excluding the global noise slot
  friend bool operator==(const ExprMetrics&, const ExprMetrics&) = default;
};

ExprMetrics expr_metrics(const KernelExpr& expr);

/// Parses the canonical s-expression text form. Throws ParseError (with byte
/// offset), MaskLengthError or LimitError.
KernelExpr parse_expr(std::string_view text, int dim, const ExprLimits& limits = {});

/// Parses without checking mask lengths against a dimension or size limits.
KernelExpr parse_expr_unchecked(std::string_view text);

std::string format_expr(const KernelExpr& expr);

/// Throws MaskLengthError or LimitError when `expr` is not admissible.
void validate_expr(const KernelExpr& expr, int dim, const ExprLimits& limits);
bool is_valid_expr(const KernelExpr& expr, int dim, const ExprLimits& limits);

// --- tree addressing -------------------------------------------------------
// Nodes are addressed by preorder index over covariance nodes (root = 0).
// Bit vectors are attributes of their Mask node and are never addressed.

struct NodeInfo {
  KernelExpr node;
  int depth;         // root has depth 1
  int param_offset;  // first hyperparameter index owned by this node
};

std::vector<NodeInfo> preorder_nodes(const KernelExpr& expr);
KernelExpr subtree_at(const KernelExpr& expr, int index);
KernelExpr replace_subtree(const KernelExpr& expr, int index, const KernelExpr& replacement);

// --- hyperparameter layout -------------------------------------------------

struct ParamSlice {
  int node_index;
  int offset;
  int count;
  std::vector<std::string> names;  // e.g. "log_ell", "log_sf"
};

/// Maps a flat unconstrained parameter vector onto expression nodes.
/// The vector holds kernel parameters in preorder, then one global log-noise slot.
class ParamLayout {
 public:
  explicit ParamLayout(const KernelExpr& expr);

  int kernel_param_count() const { return kernel_count_; }
  int size() const { return kernel_count_ + 1; }
  int noise_index() const { return kernel_count_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }

  /// Qualified names such as "n3.Periodic.log_p" and, last, "noise.log_sigma".
  std::vector<std::string> qualified_names() const;

 private:
  int kernel_count_ = 0;
  std::vector<ParamSlice> slices_;
  std::vector<std::string> node_labels_;
};

}  // namespace covevo
