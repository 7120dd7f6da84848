#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prodgraph/dims.hpp"

namespace prodgraph {

enum class BasisClass { Diag, Feature, Node };

/// One element of the orthogonal basis of the structured coefficient space.
/// `linear` is the 0-based position in the enumeration: first the NF diagonal
/// positions, then the F(F-1)/2 feature pairs, then the N(N-1)/2 node pairs,
/// pairs listed in row-major upper-triangle order (0,1),(0,2),...,(1,2),...
struct BasisIndex {
  int linear = 0;
  BasisClass cls = BasisClass::Diag;
  int a = 0;  ///< Diag: node index. Feature/Node: smaller pair member.
  int b = 0;  ///< Diag: feature index. Feature/Node: larger pair member.
};

/**
 * Index-pattern view of the basis matrices U_k of the structured space.
 *
 * Each U_k is an NF x NF matrix with at most one nonzero entry per row, all
 * entries sharing a single weight (1 for diagonal elements, 1/(2N) for
 * feature pairs, 1/(2F) for node pairs). Inner products, projections and
 * Gram contractions are computed from the (row, col) pattern without ever
 * materializing U_k; `materialize` exists for oracle tests.
 *
 * The vectorization convention is column stacking of the N x F state:
 * linear index i = f*N + n holds entry (n, f).
 */
class Basis {
 public:
  explicit Basis(GraphDims dims) : dims_(dims) {
    const int n = dims_.n_nodes, f = dims_.n_features;
    const int nf = dims_.state_size();
    diag_count_ = dims_.diag_count();
    feature_count_ = dims_.feature_pair_count();
    node_count_ = dims_.node_pair_count();
    size_ = diag_count_ + feature_count_ + node_count_;

    index_.reserve(size_);
    pattern_.resize(size_);
    col_in_row_ = Eigen::MatrixXi::Constant(size_, nf, -1);

    for (int k = 0; k < diag_count_; ++k) {
      index_.push_back({k, BasisClass::Diag, k % n, k / n});
      pattern_[k] = {{k, k}};
    }
    int k = diag_count_;
    for (int f1 = 0; f1 < f; ++f1)
      for (int f2 = f1 + 1; f2 < f; ++f2, ++k) {
        index_.push_back({k, BasisClass::Feature, f1, f2});
        auto& pat = pattern_[k];
        pat.reserve(2 * n);
        for (int nn = 0; nn < n; ++nn) {
          pat.emplace_back(f1 * n + nn, f2 * n + nn);
          pat.emplace_back(f2 * n + nn, f1 * n + nn);
        }
      }
    for (int n1 = 0; n1 < n; ++n1)
      for (int n2 = n1 + 1; n2 < n; ++n2, ++k) {
        index_.push_back({k, BasisClass::Node, n1, n2});
        auto& pat = pattern_[k];
        pat.reserve(2 * f);
        for (int ff = 0; ff < f; ++ff) {
          pat.emplace_back(ff * n + n1, ff * n + n2);
          pat.emplace_back(ff * n + n2, ff * n + n1);
        }
      }
    for (int kk = 0; kk < size_; ++kk)
      for (const auto& [r, c] : pattern_[kk]) col_in_row_(kk, r) = c;

    weight_diag_ = 1.0;
    weight_feature_ = 1.0 / (2.0 * n);
    weight_node_ = 1.0 / (2.0 * f);
  }

  const GraphDims& dims() const { return dims_; }
  int size() const { return size_; }
  int diag_count() const { return diag_count_; }
  int feature_count() const { return feature_count_; }
  int node_count() const { return node_count_; }
  /// Number of unpenalized variables (diagonal plus feature pairs).
  int unpenalized_count() const { return diag_count_ + feature_count_; }
  int node_offset() const { return diag_count_ + feature_count_; }

  const BasisIndex& index(int k) const { return index_.at(k); }

  /// Value of the nonzero entries of U_k.
  double weight(int k) const {
    switch (index_[k].cls) {
      case BasisClass::Diag: return weight_diag_;
      case BasisClass::Feature: return weight_feature_;
      default: return weight_node_;
    }
  }

  /// ||U_k||_F^2: 1 for Diag, 1/(2N) for Feature, 1/(2F) for Node.
  double norm_sq(int k) const {
    switch (index_[k].cls) {
      case BasisClass::Diag: return 1.0;
      case BasisClass::Feature: return weight_feature_;
      default: return weight_node_;
    }
  }

  /// (row, col) positions of the nonzero entries of U_k (one per row).
  const std::vector<std::pair<int, int>>& pattern(int k) const { return pattern_[k]; }

  /// Column of the single nonzero of row `row` of U_k, or -1.
  int col_in_row(int k, int row) const { return col_in_row_(k, row); }

  /// <U_k, B> for an NF x NF matrix expression B.
  template <typename Derived>
  typename Derived::Scalar inner(const Eigen::MatrixBase<Derived>& B, int k) const {
    check_square(B.rows(), B.cols());
    if (k < 0 || k >= size_) throw std::out_of_range("Basis::inner: index out of range");
    typename Derived::Scalar s = 0;
    for (const auto& [r, c] : pattern_[k]) s += B(r, c);
    return static_cast<typename Derived::Scalar>(weight(k)) * s;
  }

  /// <U_k, U_{k'} G> for an NF x NF matrix G; the (k, k') entry of the big
  /// Gram matrix when G is the lag-0 autocovariance.
  template <typename Derived>
  typename Derived::Scalar gram_entry(const Eigen::MatrixBase<Derived>& G, int k, int kp) const {
    typename Derived::Scalar s = 0;
    for (const auto& [r, c] : pattern_[k]) {
      const int cp = col_in_row_(kp, r);
      if (cp >= 0) s += G(cp, c);
    }
    return static_cast<typename Derived::Scalar>(weight(k) * weight(kp)) * s;
  }

  /// Debug/oracle path: dense U_k.
  Eigen::MatrixXd materialize(int k) const {
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(dims_.state_size(), dims_.state_size());
    for (const auto& [r, c] : pattern_[k]) U(r, c) = weight(k);
    return U;
  }

 private:
  void check_square(Eigen::Index r, Eigen::Index c) const {
    if (r != dims_.state_size() || c != dims_.state_size())
      throw std::invalid_argument("Basis: matrix must be NF x NF");
  }

  GraphDims dims_;
  int size_ = 0, diag_count_ = 0, feature_count_ = 0, node_count_ = 0;
  double weight_diag_ = 1, weight_feature_ = 1, weight_node_ = 1;
  std::vector<BasisIndex> index_;
  std::vector<std::vector<std::pair<int, int>>> pattern_;
  Eigen::MatrixXi col_in_row_;
};

}  // namespace prodgraph
