#include "covevo/gram.hpp"

#include <cmath>
#include <numbers>

#include "vector_math.hpp"

namespace covevo {

PairGeometry::PairGeometry(Eigen::MatrixXd a, Eigen::MatrixXd b)
    : a_(std::move(a)), b_(std::move(b)), same_set_(false) {
  if (a_.cols() != b_.cols()) throw DimensionError("point sets have different dimensions");
  if (a_.cols() < 1) throw DimensionError("points must have at least one dimension");
  const Eigen::Index n = rows(), m = cols();
  pair_i_.reserve(static_cast<std::size_t>(n * m));
  pair_j_.reserve(static_cast<std::size_t>(n * m));
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      pair_i_.push_back(i);
      pair_j_.push_back(j);
    }
  }
  diagonal_ = Eigen::ArrayXd::Zero(pairs());
}

PairGeometry::PairGeometry(Eigen::MatrixXd a) : a_(std::move(a)), same_set_(true) {
  if (a_.cols() < 1) throw DimensionError("points must have at least one dimension");
  b_ = a_;
  const Eigen::Index n = rows();
  pair_i_.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  pair_j_.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      pair_i_.push_back(i);
      pair_j_.push_back(j);
    }
  }
  diagonal_ = Eigen::ArrayXd::Zero(pairs());
  for (Eigen::Index p = 0; p < pairs(); ++p) {
    if (pair_i_[p] == pair_j_[p]) diagonal_[p] = 1.0;
  }
}

PairGeometry::Entry& PairGeometry::entry(const BitVector& active) {
  auto it = cache_.find(active);
  if (it != cache_.end()) return it->second;
  if (static_cast<Eigen::Index>(active.size()) != dim())
    throw MaskLengthError("mask length does not match input dimension");
  Entry e;
  e.sqdist = Eigen::ArrayXd::Zero(pairs());
  for (Eigen::Index d = 0; d < dim(); ++d) {
    if (!active[d]) continue;
    for (Eigen::Index p = 0; p < pairs(); ++p) {
      double diff = a_(pair_i_[p], d) - b_(pair_j_[p], d);
      e.sqdist[p] += diff * diff;
    }
  }
  return cache_.emplace(active, std::move(e)).first->second;
}

const Eigen::ArrayXd& PairGeometry::sqdist(const BitVector& active) { return entry(active).sqdist; }

const Eigen::ArrayXd& PairGeometry::dist(const BitVector& active) {
  auto& e = entry(active);
  if (!e.has_dist) {
    e.dist = e.sqdist.sqrt();
    e.has_dist = true;
  }
  return e.dist;
}

const Eigen::ArrayXd& PairGeometry::dot(const BitVector& active) {
  auto& e = entry(active);
  if (!e.has_dot) {
    e.dot = Eigen::ArrayXd::Zero(pairs());
    for (Eigen::Index d = 0; d < dim(); ++d) {
      if (!active[d]) continue;
      for (Eigen::Index p = 0; p < pairs(); ++p) e.dot[p] += a_(pair_i_[p], d) * b_(pair_j_[p], d);
    }
    e.has_dot = true;
  }
  return e.dot;
}

Eigen::MatrixXd PairGeometry::unpack(const Eigen::ArrayXd& flat) const {
  const Eigen::Index n = rows(), m = cols();
  if (!same_set_) return Eigen::Map<const Eigen::MatrixXd>(flat.data(), n, m);
  Eigen::MatrixXd out(n, n);
  Eigen::Index p = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i, ++p) {
      out(i, j) = flat[p];
      out(j, i) = flat[p];
    }
  }
  return out;
}

Eigen::ArrayXd PairGeometry::pack_adjoint(const Eigen::MatrixXd& G) const {
  const Eigen::Index n = rows(), m = cols();
  if (G.rows() != n || G.cols() != m) throw DimensionError("adjoint has the wrong shape");
  if (!same_set_) return Eigen::Map<const Eigen::ArrayXd>(G.data(), n * m);
  Eigen::ArrayXd out(pairs());
  Eigen::Index p = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i, ++p) out[p] = G(i, j) + G(j, i);
    out[p++] = G(j, j);
  }
  return out;
}

// --- tape ------------------------------------------------------------------

namespace {

double contract(const Eigen::ArrayXd& g, const Eigen::ArrayXd& m) { return (g * m).sum(); }

}  // namespace

GramTape::GramTape(const KernelExpr& expr, const Eigen::VectorXd& theta, PairGeometry& geometry)
    : theta_(theta), geometry_(geometry) {
  param_count_ = expr_metrics(expr).param_count;
  if (theta.size() < param_count_) throw DimensionError("too few hyperparameters");
  for (int j = 0; j < param_count_; ++j) {
    if (!std::isfinite(theta[j])) throw NumericalError("non-finite hyperparameter");
  }
  BitVector all(static_cast<std::size_t>(geometry.dim()), 1);
  int offset = 0;
  forward(expr, offset, all);
}

int GramTape::forward(const KernelExpr& e, int& offset, const BitVector& active) {
  const int index = static_cast<int>(records_.size());
  records_.push_back(Record{e, offset, active, -1});
  values_.emplace_back();
  aux_.emplace_back();
  next_sibling_.push_back(-1);
  const Eigen::Index np = geometry_.pairs();

  if (e.kind() == NodeKind::Terminal) {
    const double* p = theta_.data() + offset;
    offset += terminal_param_count(e.terminal_kind());
    Eigen::ArrayXd k;
    switch (e.terminal_kind()) {
      case TerminalKind::SE: {
        double ell2 = std::exp(2 * p[0]), sf2 = std::exp(2 * p[1]);
        k = sf2 * (-0.5 / ell2 * geometry_.sqdist(active)).exp();
        break;
      }
      case TerminalKind::RQ: {
        double ell2 = std::exp(2 * p[0]), sf2 = std::exp(2 * p[1]), alpha = std::exp(p[2]);
        Eigen::ArrayXd t = 1.0 + 0.5 / (alpha * ell2) * geometry_.sqdist(active);
        Eigen::ArrayXd log_t = t.log();
        k = sf2 * (-alpha * log_t).exp();
        aux_[index].a = std::move(t);
        aux_[index].b = std::move(log_t);
        break;
      }
      case TerminalKind::Matern1: {
        double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
        k = sf2 * (-geometry_.dist(active) / ell).exp();
        break;
      }
      case TerminalKind::Matern3: {
        double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
        Eigen::ArrayXd u = std::sqrt(3.0) / ell * geometry_.dist(active);
        k = sf2 * (1 + u) * (-u).exp();
        break;
      }
      case TerminalKind::Matern5: {
        double ell = std::exp(p[0]), sf2 = std::exp(2 * p[1]);
        Eigen::ArrayXd u = std::sqrt(5.0) / ell * geometry_.dist(active);
        k = sf2 * (1 + u + u.square() / 3) * (-u).exp();
        break;
      }
      case TerminalKind::Periodic: {
        double ell2 = std::exp(2 * p[0]), period = std::exp(p[1]), sf2 = std::exp(2 * p[2]);
        const Eigen::ArrayXd& r = geometry_.dist(active);
        const double w = std::numbers::pi / period;
        Eigen::ArrayXd s(np), c(np);
        detail::sin_cos(r.data(), w, s.data(), c.data(), np);
        k = sf2 * (-2.0 / ell2 * s.square()).exp();
        aux_[index].a = std::move(s);
        aux_[index].b = std::move(c);
        break;
      }
      case TerminalKind::Linear:
        k = std::exp(-2 * p[0]) * geometry_.dot(active);
        break;
      case TerminalKind::Constant:
        k = Eigen::ArrayXd::Constant(np, std::exp(2 * p[0]));
        break;
      case TerminalKind::Noise:
        k = std::exp(2 * p[0]) * geometry_.diagonal();
        break;
    }
    values_[index] = std::move(k);
    return index;
  }

  if (e.kind() == NodeKind::Scale) ++offset;
  BitVector sub = active;
  if (e.kind() == NodeKind::Mask) {
    if (static_cast<Eigen::Index>(e.bits().size()) != geometry_.dim())
      throw MaskLengthError("mask length does not match input dimension");
    for (std::size_t d = 0; d < sub.size(); ++d) sub[d] = active[d] & e.bits()[d];
  }

  int prev = -1;
  for (const auto& c : e.children()) {
    int child = forward(c, offset, sub);
    if (prev < 0) {
      records_[index].first_child = child;
    } else {
      next_sibling_[prev] = child;
    }
    prev = child;
  }

  Eigen::ArrayXd k;
  int c = records_[index].first_child;
  switch (e.kind()) {
    case NodeKind::Sum:
      k = values_[c];
      for (c = next_sibling_[c]; c >= 0; c = next_sibling_[c]) k += values_[c];
      break;
    case NodeKind::Prod:
      k = values_[c];
      for (c = next_sibling_[c]; c >= 0; c = next_sibling_[c]) k *= values_[c];
      break;
    case NodeKind::Scale:
      k = std::exp(2 * theta_[records_[index].offset]) * values_[c];
      break;
    case NodeKind::Mask:
      k = values_[c];
      break;
    case NodeKind::Terminal:
      break;
  }
  values_[index] = std::move(k);
  return index;
}

Eigen::VectorXd GramTape::contract_gradient(const Eigen::MatrixXd& adjoint) const {
  return contract_gradient_flat(geometry_.pack_adjoint(adjoint));
}

Eigen::VectorXd GramTape::contract_gradient_flat(const Eigen::ArrayXd& adjoint) const {
  if (adjoint.size() != geometry_.pairs()) throw DimensionError("adjoint has the wrong size");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(param_count_);
  backward(0, adjoint, out);
  return out;
}

void GramTape::backward(int index, const Eigen::ArrayXd& adjoint, Eigen::VectorXd& out) const {
  const auto& rec = records_[index];
  switch (rec.node.kind()) {
    case NodeKind::Terminal:
      terminal_gradient(index, adjoint, out);
      return;
    case NodeKind::Sum:
    case NodeKind::Mask:
      for (int c = rec.first_child; c >= 0; c = next_sibling_[c]) backward(c, adjoint, out);
      return;
    case NodeKind::Scale: {
      int c = rec.first_child;
      double s2 = std::exp(2 * theta_[rec.offset]);
      out[rec.offset] += 2 * s2 * contract(adjoint, values_[c]);
      Eigen::ArrayXd child_adjoint = s2 * adjoint;
      backward(c, child_adjoint, out);
      return;
    }
    case NodeKind::Prod: {
      std::vector<int> kids;
      for (int c = rec.first_child; c >= 0; c = next_sibling_[c]) kids.push_back(c);
      if (kids.size() == 1) {
        backward(kids[0], adjoint, out);
        return;
      }
      // Products of all other factors via prefix/suffix sweeps (no division).
      const std::size_t m = kids.size();
      std::vector<Eigen::ArrayXd> suffix(m);
      suffix[m - 1] = values_[kids[m - 1]];
      for (std::size_t i = m - 1; i-- > 1;) suffix[i] = values_[kids[i]] * suffix[i + 1];
      Eigen::ArrayXd prefix;
      Eigen::ArrayXd child_adjoint;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == 0) {
          child_adjoint = adjoint * suffix[1];
        } else if (i == m - 1) {
          child_adjoint = adjoint * prefix;
        } else {
          child_adjoint = adjoint * prefix * suffix[i + 1];
        }
        backward(kids[i], child_adjoint, out);
        if (i == 0) {
          prefix = values_[kids[0]];
        } else if (i + 1 < m) {
          prefix *= values_[kids[i]];
        }
      }
      return;
    }
  }
}

void GramTape::terminal_gradient(int index, const Eigen::ArrayXd& g, Eigen::VectorXd& out) const {
  const auto& rec = records_[index];
  const double* p = theta_.data() + rec.offset;
  double* d = out.data() + rec.offset;
  const Eigen::ArrayXd& k = values_[index];
  switch (rec.node.terminal_kind()) {
    case TerminalKind::SE: {
      double ell2 = std::exp(2 * p[0]);
      d[0] += contract(g, k * geometry_.sqdist(rec.active)) / ell2;
      d[1] += 2 * contract(g, k);
      return;
    }
    case TerminalKind::RQ: {
      double alpha = std::exp(p[2]);
      const Eigen::ArrayXd& t = aux_[index].a;
      const Eigen::ArrayXd& log_t = aux_[index].b;
      // (t - 1) / t = r^2 / (2 alpha ell^2 t)
      Eigen::ArrayXd ratio = (t - 1.0) / t;
      d[0] += 2 * alpha * contract(g, k * ratio);
      d[1] += 2 * contract(g, k);
      d[2] += alpha * contract(g, k * (ratio - log_t));
      return;
    }
    case TerminalKind::Matern1: {
      double ell = std::exp(p[0]);
      d[0] += contract(g, k * geometry_.dist(rec.active)) / ell;
      d[1] += 2 * contract(g, k);
      return;
    }
    case TerminalKind::Matern3: {
      double ell = std::exp(p[0]);
      Eigen::ArrayXd u = std::sqrt(3.0) / ell * geometry_.dist(rec.active);
      d[0] += contract(g, k * u.square() / (1 + u));
      d[1] += 2 * contract(g, k);
      return;
    }
    case TerminalKind::Matern5: {
      double ell = std::exp(p[0]);
      Eigen::ArrayXd u = std::sqrt(5.0) / ell * geometry_.dist(rec.active);
      d[0] += contract(g, k * (u.square() / 3) * (1 + u) / (1 + u + u.square() / 3));
      d[1] += 2 * contract(g, k);
      return;
    }
    case TerminalKind::Periodic: {
      double ell2 = std::exp(2 * p[0]), period = std::exp(p[1]);
      const Eigen::ArrayXd& s = aux_[index].a;
      const Eigen::ArrayXd& c = aux_[index].b;
      const double w = std::numbers::pi / period;
      d[0] += 4 / ell2 * contract(g, k * s.square());
      d[1] += 4 * w / ell2 * contract(g, k * geometry_.dist(rec.active) * s * c);
      d[2] += 2 * contract(g, k);
      return;
    }
    case TerminalKind::Linear:
      d[0] += -2 * contract(g, k);
      return;
    case TerminalKind::Constant:
      d[0] += 2 * std::exp(2 * p[0]) * g.sum();
      return;
    case TerminalKind::Noise:
      d[0] += 2 * contract(g, k);
      return;
  }
}

Eigen::MatrixXd kernel_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta,
                              PairGeometry& geometry) {
  GramTape tape(expr, theta, geometry);
  return tape.matrix();
}

}  // namespace covevo
