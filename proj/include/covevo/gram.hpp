#pragma once

// Matrix-level covariance evaluation.
//
// The hyperparameter optimizer never needs the individual dK/dtheta_j
// matrices, only their contractions sum_ij G_ij dK_ij/dtheta_j against the
// likelihood's adjoint G. GramTape records the forward pass over the
// expression and back-propagates G through Sum/Prod/Scale/Mask, so the cost
// per gradient is O(nodes * n^2) instead of O(params * n^2) matrix builds.
//
// Kernel values live in a flat pair layout: all n*m pairs (column-major) for
// two different point sets, the n(n+1)/2 pairs of the upper triangle for a
// set with itself.

#include <map>
#include <vector>

#include <Eigen/Core>

#include "covevo/kernel_expr.hpp"

namespace covevo {

/// Pairwise geometry between two point sets, cached per active-dimension set.
/// Not thread-safe; own one per evaluation context.
class PairGeometry {
 public:
  /// Cross geometry between rows of `a` and rows of `b`.
  PairGeometry(Eigen::MatrixXd a, Eigen::MatrixXd b);
  /// Geometry of a training set with itself; Noise terminals see the identity.
  explicit PairGeometry(Eigen::MatrixXd a);

  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return b_.rows(); }
  Eigen::Index dim() const { return a_.cols(); }
  bool same_set() const { return same_set_; }
  Eigen::Index pairs() const { return pair_i_.size(); }

  const Eigen::ArrayXd& sqdist(const BitVector& active);
  const Eigen::ArrayXd& dist(const BitVector& active);
  const Eigen::ArrayXd& dot(const BitVector& active);
  /// 1 on pairs (i, i) of a same-set geometry, 0 elsewhere.
  const Eigen::ArrayXd& diagonal() const { return diagonal_; }

  /// Full rows() x cols() matrix from flat pair values.
  Eigen::MatrixXd unpack(const Eigen::ArrayXd& flat) const;
  /// Flat weights w with sum_ij G_ij K_ij = sum_p w_p flat_p for any
  /// matrix K that unpacks from a flat array.
  Eigen::ArrayXd pack_adjoint(const Eigen::MatrixXd& G) const;

 private:
  struct Entry {
    Eigen::ArrayXd sqdist, dist, dot;
    bool has_dist = false, has_dot = false;
  };
  Entry& entry(const BitVector& active);

  Eigen::MatrixXd a_, b_;
  bool same_set_;
  std::vector<Eigen::Index> pair_i_, pair_j_;
  Eigen::ArrayXd diagonal_;
  std::map<BitVector, Entry> cache_;
};

class GramTape {
 public:
  /// Evaluates the kernel matrix and records what the backward pass needs.
  GramTape(const KernelExpr& expr, const Eigen::VectorXd& theta, PairGeometry& geometry);

  Eigen::MatrixXd matrix() const { return geometry_.unpack(values_.front()); }
  const Eigen::ArrayXd& flat() const { return values_.front(); }

  /// out_j = sum_ij adjoint_ij * dK_ij / dtheta_j, j over kernel parameters.
  Eigen::VectorXd contract_gradient(const Eigen::MatrixXd& adjoint) const;
  /// Same contraction with an adjoint already in flat form (see pack_adjoint).
  Eigen::VectorXd contract_gradient_flat(const Eigen::ArrayXd& adjoint) const;

 private:
  struct Record {
    KernelExpr node;
    int offset;
    BitVector active;
    int first_child;  // index into values_ of the first child, or -1
  };
  int forward(const KernelExpr& e, int& offset, const BitVector& active);
  void backward(int index, const Eigen::ArrayXd& adjoint, Eigen::VectorXd& out) const;
  void terminal_gradient(int index, const Eigen::ArrayXd& adjoint, Eigen::VectorXd& out) const;

  const Eigen::VectorXd& theta_;
  PairGeometry& geometry_;
  std::vector<Record> records_;
  std::vector<Eigen::ArrayXd> values_;
  struct Aux {
    Eigen::ArrayXd a, b;
  };
  std::vector<Aux> aux_;  // per-node values kept for the backward pass
  std::vector<int> next_sibling_;
  int param_count_ = 0;
};

/// K(A, B) for the expression; Noise terminals contribute only when
/// `geometry.same_set()`.
Eigen::MatrixXd kernel_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta,
                              PairGeometry& geometry);

}  // namespace covevo
