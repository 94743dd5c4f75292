#include "covevo/kernel_expr.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace covevo {

struct KernelExpr::Node {
  NodeKind kind;
  TerminalKind terminal;
  std::vector<KernelExpr> children;
  BitVector bits;
};

namespace {

struct TerminalSpec {
  TerminalKind kind;
  std::string_view name;
  int params;
};

constexpr TerminalSpec kTerminalSpecs[] = {
    {TerminalKind::SE, "SE", 2},           {TerminalKind::RQ, "RQ", 3},
    {TerminalKind::Matern1, "Matern1", 2}, {TerminalKind::Matern3, "Matern3", 2},
    {TerminalKind::Matern5, "Matern5", 2}, {TerminalKind::Periodic, "Periodic", 3},
    {TerminalKind::Linear, "Linear", 1},   {TerminalKind::Constant, "Constant", 1},
    {TerminalKind::Noise, "Noise", 1},
};

const TerminalSpec& spec_of(TerminalKind kind) {
  for (const auto& s : kTerminalSpecs) {
    if (s.kind == kind) return s;
  }
  throw Error("unknown terminal kind");
}

}  // namespace

std::string_view terminal_name(TerminalKind kind) { return spec_of(kind).name; }

int terminal_param_count(TerminalKind kind) { return spec_of(kind).params; }

KernelExpr KernelExpr::terminal(TerminalKind kind) {
  return KernelExpr(std::make_shared<const Node>(Node{NodeKind::Terminal, kind, {}, {}}));
}

KernelExpr KernelExpr::sum(std::vector<KernelExpr> children) {
  if (children.empty()) throw Error("Sum needs at least one child");
  return KernelExpr(
      std::make_shared<const Node>(Node{NodeKind::Sum, TerminalKind::SE, std::move(children), {}}));
}

KernelExpr KernelExpr::prod(std::vector<KernelExpr> children) {
  if (children.empty()) throw Error("Prod needs at least one child");
  return KernelExpr(
      std::make_shared<const Node>(Node{NodeKind::Prod, TerminalKind::SE, std::move(children), {}}));
}

KernelExpr KernelExpr::scale(KernelExpr child) {
  return KernelExpr(
      std::make_shared<const Node>(Node{NodeKind::Scale, TerminalKind::SE, {std::move(child)}, {}}));
}

KernelExpr KernelExpr::mask(BitVector bits, KernelExpr child) {
  for (auto b : bits) {
    if (b > 1) throw Error("mask bits must be 0 or 1");
  }
  return KernelExpr(std::make_shared<const Node>(
      Node{NodeKind::Mask, TerminalKind::SE, {std::move(child)}, std::move(bits)}));
}

NodeKind KernelExpr::kind() const { return node_->kind; }
TerminalKind KernelExpr::terminal_kind() const { return node_->terminal; }
std::span<const KernelExpr> KernelExpr::children() const { return node_->children; }
const BitVector& KernelExpr::bits() const { return node_->bits; }

int KernelExpr::own_param_count() const {
  switch (node_->kind) {
    case NodeKind::Terminal:
      return terminal_param_count(node_->terminal);
    case NodeKind::Scale:
      return 1;
    default:
      return 0;
  }
}

bool operator==(const KernelExpr& a, const KernelExpr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  if (a.kind() == NodeKind::Terminal) return a.terminal_kind() == b.terminal_kind();
  if (a.bits() != b.bits()) return false;
  auto ca = a.children();
  auto cb = b.children();
  return std::equal(ca.begin(), ca.end(), cb.begin(), cb.end());
}

ExprMetrics expr_metrics(const KernelExpr& expr) {
  ExprMetrics m{1, 1, expr.own_param_count()};
  if (expr.kind() == NodeKind::Mask) m.length += 1;
  int child_height = 0;
  for (const auto& c : expr.children()) {
    auto cm = expr_metrics(c);
    m.length += cm.length;
    m.param_count += cm.param_count;
    child_height = std::max(child_height, cm.height);
  }
  m.height += child_height;
  return m;
}

// --- text form -------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  KernelExpr parse() {
    auto e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view word() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  KernelExpr parse_expr() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    if (text_[pos_] != '(') {
      std::size_t at = pos_;
      auto name = word();
      for (const auto& s : kTerminalSpecs) {
        if (s.name == name) return KernelExpr::terminal(s.kind);
      }
      throw ParseError("unknown terminal '" + std::string(name) + "'", at);
    }
    ++pos_;
    std::size_t at = pos_;
    auto op = word();
    KernelExpr result = KernelExpr::terminal(TerminalKind::SE);
    if (op == "Sum" || op == "Prod") {
      std::vector<KernelExpr> children;
      while (!peek(')')) {
        if (pos_ >= text_.size()) throw ParseError("unterminated operator", pos_);
        children.push_back(parse_expr());
      }
      if (children.empty()) throw ParseError(std::string(op) + " needs at least one child", pos_);
      result = op == "Sum" ? KernelExpr::sum(std::move(children))
                           : KernelExpr::prod(std::move(children));
    } else if (op == "Scale") {
      result = KernelExpr::scale(parse_expr());
    } else if (op == "Mask") {
      auto bits = parse_bits();
      result = KernelExpr::mask(std::move(bits), parse_expr());
    } else {
      throw ParseError("unknown operator '" + std::string(op) + "'", at);
    }
    expect(')');
    return result;
  }

  BitVector parse_bits() {
    expect('[');
    BitVector bits;
    while (!peek(']')) {
      if (pos_ >= text_.size()) throw ParseError("unterminated bit vector", pos_);
      char c = text_[pos_];
      if (c != '0' && c != '1') throw ParseError("bit vector entries must be 0 or 1", pos_);
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
      ++pos_;
    }
    expect(']');
    return bits;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void format_into(const KernelExpr& e, std::ostringstream& out) {
  switch (e.kind()) {
    case NodeKind::Terminal:
      out << terminal_name(e.terminal_kind());
      return;
    case NodeKind::Sum:
    case NodeKind::Prod:
      out << (e.kind() == NodeKind::Sum ? "(Sum" : "(Prod");
      for (const auto& c : e.children()) {
        out << ' ';
        format_into(c, out);
      }
      out << ')';
      return;
    case NodeKind::Scale:
      out << "(Scale ";
      format_into(e.children()[0], out);
      out << ')';
      return;
    case NodeKind::Mask:
      out << "(Mask [";
      for (std::size_t i = 0; i < e.bits().size(); ++i) {
        if (i) out << ' ';
        out << static_cast<int>(e.bits()[i]);
      }
      out << "] ";
      format_into(e.children()[0], out);
      out << ')';
      return;
  }
}

void check_masks(const KernelExpr& e, int dim) {
  if (e.kind() == NodeKind::Mask && static_cast<int>(e.bits().size()) != dim) {
    throw MaskLengthError("mask bit vector has length " + std::to_string(e.bits().size()) +
                          " but the data has " + std::to_string(dim) + " dimensions");
  }
  for (const auto& c : e.children()) check_masks(c, dim);
}

}  // namespace

KernelExpr parse_expr_unchecked(std::string_view text) { return Parser(text).parse(); }

KernelExpr parse_expr(std::string_view text, int dim, const ExprLimits& limits) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  auto e = parse_expr_unchecked(text);
  validate_expr(e, dim, limits);
  return e;
}

std::string format_expr(const KernelExpr& expr) {
  std::ostringstream out;
  format_into(expr, out);
  return out.str();
}

void validate_expr(const KernelExpr& expr, int dim, const ExprLimits& limits) {
  check_masks(expr, dim);
  auto m = expr_metrics(expr);
  if (m.length > limits.max_length)
    throw LimitError("expression length " + std::to_string(m.length) + " exceeds " +
                     std::to_string(limits.max_length));
  if (m.height > limits.max_height)
    throw LimitError("expression height " + std::to_string(m.height) + " exceeds " +
                     std::to_string(limits.max_height));
}

bool is_valid_expr(const KernelExpr& expr, int dim, const ExprLimits& limits) {
  try {
    validate_expr(expr, dim, limits);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// --- addressing ------------------------------------------------------------

namespace {

void collect(const KernelExpr& e, int depth, int& offset, std::vector<NodeInfo>& out) {
  out.push_back(NodeInfo{e, depth, offset});
  offset += e.own_param_count();
  for (const auto& c : e.children()) collect(c, depth + 1, offset, out);
}

// Returns the rebuilt subtree; `index` counts down through the preorder walk.
KernelExpr replace_walk(const KernelExpr& e, int& index, const KernelExpr& replacement,
                        bool& done) {
  if (index == 0) {
    done = true;
    return replacement;
  }
  --index;
  if (e.children().empty()) return e;
  std::vector<KernelExpr> kids;
  kids.reserve(e.children().size());
  bool changed = false;
  for (const auto& c : e.children()) {
    if (done) {
      kids.push_back(c);
      continue;
    }
    kids.push_back(replace_walk(c, index, replacement, done));
    changed = changed || done;
  }
  if (!changed) return e;
  switch (e.kind()) {
    case NodeKind::Sum:
      return KernelExpr::sum(std::move(kids));
    case NodeKind::Prod:
      return KernelExpr::prod(std::move(kids));
    case NodeKind::Scale:
      return KernelExpr::scale(std::move(kids[0]));
    case NodeKind::Mask:
      return KernelExpr::mask(e.bits(), std::move(kids[0]));
    case NodeKind::Terminal:
      break;
  }
  return e;
}

}  // namespace

std::vector<NodeInfo> preorder_nodes(const KernelExpr& expr) {
  std::vector<NodeInfo> out;
  int offset = 0;
  collect(expr, 1, offset, out);
  return out;
}

KernelExpr subtree_at(const KernelExpr& expr, int index) {
  auto nodes = preorder_nodes(expr);
  if (index < 0 || index >= static_cast<int>(nodes.size())) throw Error("node index out of range");
  return nodes[index].node;
}

KernelExpr replace_subtree(const KernelExpr& expr, int index, const KernelExpr& replacement) {
  if (index < 0) throw Error("node index out of range");
  bool done = false;
  auto out = replace_walk(expr, index, replacement, done);
  if (!done) throw Error("node index out of range");
  return out;
}

// --- layout ----------------------------------------------------------------

ParamLayout::ParamLayout(const KernelExpr& expr) {
  auto nodes = preorder_nodes(expr);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    const auto& n = nodes[i].node;
    int count = n.own_param_count();
    if (count == 0) continue;
    ParamSlice slice{i, nodes[i].param_offset, count, {}};
    std::string label = "n" + std::to_string(i) + ".";
    if (n.kind() == NodeKind::Scale) {
      label += "Scale";
      slice.names = {"log_s"};
    } else {
      label += std::string(terminal_name(n.terminal_kind()));
      switch (n.terminal_kind()) {
        case TerminalKind::RQ:
          slice.names = {"log_ell", "log_sf", "log_alpha"};
          break;
        case TerminalKind::Periodic:
          slice.names = {"log_ell", "log_p", "log_sf"};
          break;
        case TerminalKind::Linear:
          slice.names = {"log_ell"};
          break;
        case TerminalKind::Constant:
        case TerminalKind::Noise:
          slice.names = {"log_sf"};
          break;
        default:
          slice.names = {"log_ell", "log_sf"};
      }
    }
    kernel_count_ += count;
    slices_.push_back(std::move(slice));
    node_labels_.push_back(std::move(label));
  }
}

std::vector<std::string> ParamLayout::qualified_names() const {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < slices_.size(); ++s) {
    for (const auto& n : slices_[s].names) out.push_back(node_labels_[s] + "." + n);
  }
  out.push_back("noise.log_sigma");
  return out;
}

}  // namespace covevo
