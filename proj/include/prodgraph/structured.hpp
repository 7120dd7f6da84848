#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "prodgraph/basis.hpp"
#include "prodgraph/dims.hpp"

namespace prodgraph {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Column-stacked vectorization of an N x F matrix: entry f*N + n holds X(n, f).
/// Satisfies vec(A_N X) = (I_F (x) A_N) vec(X) and vec(X A_F^T) = (A_F (x) I_N) vec(X).
template <typename Derived>
Vec<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& X) {
  Vec<typename Derived::Scalar> v(X.size());
  Eigen::Index i = 0;
  for (Eigen::Index f = 0; f < X.cols(); ++f)
    for (Eigen::Index n = 0; n < X.rows(); ++n) v(i++) = X(n, f);
  return v;
}

/// Inverse of `vec`: ivec(vec(X)) == X.
template <typename Derived>
Mat<typename Derived::Scalar> ivec(const Eigen::MatrixBase<Derived>& v, int n_nodes,
                                   int n_features) {
  if (v.size() != static_cast<Eigen::Index>(n_nodes) * n_features)
    throw std::invalid_argument("ivec: length mismatch");
  Mat<typename Derived::Scalar> X(n_nodes, n_features);
  Eigen::Index i = 0;
  for (int f = 0; f < n_features; ++f)
    for (int n = 0; n < n_nodes; ++n) X(n, f) = v(i++);
  return X;
}

/// Upper-triangle entries of a square matrix in row-major pair order
/// (0,1),(0,2),...,(1,2),... — the same order as the basis enumeration.
template <typename Derived>
Vec<typename Derived::Scalar> svec(const Eigen::MatrixBase<Derived>& M) {
  const Eigen::Index n = M.rows();
  if (M.cols() != n) throw std::invalid_argument("svec: matrix must be square");
  Vec<typename Derived::Scalar> v(n * (n - 1) / 2);
  Eigen::Index i = 0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) v(i++) = M(a, b);
  return v;
}

/// Inverse of `svec` onto a symmetric hollow matrix of order n.
template <typename Derived>
Mat<typename Derived::Scalar> isvec(const Eigen::MatrixBase<Derived>& v, int n) {
  if (v.size() != static_cast<Eigen::Index>(n) * (n - 1) / 2)
    throw std::invalid_argument("isvec: length mismatch");
  Mat<typename Derived::Scalar> M = Mat<typename Derived::Scalar>::Zero(n, n);
  Eigen::Index i = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      M(a, b) = v(i);
      M(b, a) = v(i);
      ++i;
    }
  return M;
}

/**
 * A structured coefficient: free diagonal grid D plus the Kronecker sum of a
 * symmetric hollow feature graph A_F and a symmetric hollow node graph A_N.
 * The dense form is diag(vec(D)) + A_F (x) I_N + I_F (x) A_N.
 */
template <typename Scalar = double>
struct StructuredCoef {
  Mat<Scalar> diag;  ///< N x F grid D
  Mat<Scalar> a_f;   ///< F x F, symmetric, zero diagonal
  Mat<Scalar> a_n;   ///< N x N, symmetric, zero diagonal

  static StructuredCoef Zero(const GraphDims& d) {
    StructuredCoef s;
    s.diag = Mat<Scalar>::Zero(d.n_nodes, d.n_features);
    s.a_f = Mat<Scalar>::Zero(d.n_features, d.n_features);
    s.a_n = Mat<Scalar>::Zero(d.n_nodes, d.n_nodes);
    return s;
  }

  int n_nodes() const { return static_cast<int>(diag.rows()); }
  int n_features() const { return static_cast<int>(diag.cols()); }

  /// Exact symmetry/hollow checks; throws on violation.
  void validate() const {
    if (a_f.rows() != a_f.cols() || a_f.rows() != diag.cols())
      throw std::invalid_argument("StructuredCoef: a_f dimension mismatch");
    if (a_n.rows() != a_n.cols() || a_n.rows() != diag.rows())
      throw std::invalid_argument("StructuredCoef: a_n dimension mismatch");
    if (a_f != a_f.transpose().eval() || a_n != a_n.transpose().eval())
      throw std::invalid_argument("StructuredCoef: component graphs must be symmetric");
    if (a_f.diagonal().cwiseAbs().maxCoeff() != Scalar(0) ||
        a_n.diagonal().cwiseAbs().maxCoeff() != Scalar(0))
      throw std::invalid_argument("StructuredCoef: component graphs must be hollow");
  }

  StructuredCoef& operator+=(const StructuredCoef& o) {
    diag += o.diag;
    a_f += o.a_f;
    a_n += o.a_n;
    return *this;
  }
  StructuredCoef operator*(Scalar c) const {
    StructuredCoef s = *this;
    s.diag *= c;
    s.a_f *= c;
    s.a_n *= c;
    return s;
  }
};

/// Dense NF x NF matrix of a structured coefficient.
template <typename Scalar>
Mat<Scalar> assemble(const StructuredCoef<Scalar>& s) {
  s.validate();
  const int n = s.n_nodes(), f = s.n_features();
  const int nf = n * f;
  Mat<Scalar> A = Mat<Scalar>::Zero(nf, nf);
  for (int ff = 0; ff < f; ++ff)
    for (int nn = 0; nn < n; ++nn) A(ff * n + nn, ff * n + nn) = s.diag(nn, ff);
  // A_F (x) I_N
  for (int f1 = 0; f1 < f; ++f1)
    for (int f2 = 0; f2 < f; ++f2) {
      if (f1 == f2) continue;
      for (int nn = 0; nn < n; ++nn) A(f1 * n + nn, f2 * n + nn) += s.a_f(f1, f2);
    }
  // I_F (x) A_N
  for (int ff = 0; ff < f; ++ff)
    for (int n1 = 0; n1 < n; ++n1)
      for (int n2 = 0; n2 < n; ++n2) {
        if (n1 == n2) continue;
        A(ff * n + n1, ff * n + n2) += s.a_n(n1, n2);
      }
  return A;
}

/// D o X + A_N X + X A_F^T, the matrix form of x -> assemble(s) * vec(X).
template <typename Scalar, typename Derived>
Mat<Scalar> apply_structured(const StructuredCoef<Scalar>& s,
                             const Eigen::MatrixBase<Derived>& X) {
  if (X.rows() != s.diag.rows() || X.cols() != s.diag.cols())
    throw std::invalid_argument("apply_structured: dimension mismatch");
  return (s.diag.array() * X.array()).matrix() + s.a_n * X + X * s.a_f.transpose();
}

/// Orthogonal projection of an NF x NF matrix onto the structured space.
/// Each coefficient is the average of B over the index pattern of its basis
/// element; see `Basis`.
template <typename Derived>
StructuredCoef<typename Derived::Scalar> project_graph(const Basis& basis,
                                                       const Eigen::MatrixBase<Derived>& B) {
  using Scalar = typename Derived::Scalar;
  const GraphDims& d = basis.dims();
  if (B.rows() != d.state_size() || B.cols() != d.state_size())
    throw std::invalid_argument("project_graph: matrix must be NF x NF");
  StructuredCoef<Scalar> s = StructuredCoef<Scalar>::Zero(d);
  for (int k = 0; k < basis.size(); ++k) {
    const BasisIndex& bi = basis.index(k);
    // <U_k, B> / ||U_k||^2 spread back over the pattern collapses to the
    // plain inner product for the per-entry component value.
    const Scalar avg = basis.inner(B, k);
    switch (bi.cls) {
      case BasisClass::Diag:
        s.diag(bi.a, bi.b) = avg;
        break;
      case BasisClass::Feature:
        s.a_f(bi.a, bi.b) = avg;
        s.a_f(bi.b, bi.a) = avg;
        break;
      case BasisClass::Node:
        s.a_n(bi.a, bi.b) = avg;
        s.a_n(bi.b, bi.a) = avg;
        break;
    }
  }
  return s;
}

/// Scaled coordinate vector a^s with a^s_k = <U_k, A> / ||U_k||^2, so that
/// A = sum_k a^s_k U_k. Diagonal entries map to themselves, feature pairs to
/// 2N * a_f, node pairs to 2F * a_n.
template <typename Scalar>
Vec<Scalar> to_scaled(const Basis& basis, const StructuredCoef<Scalar>& s) {
  const GraphDims& d = basis.dims();
  Vec<Scalar> a(basis.size());
  for (int k = 0; k < basis.size(); ++k) {
    const BasisIndex& bi = basis.index(k);
    switch (bi.cls) {
      case BasisClass::Diag: a(k) = s.diag(bi.a, bi.b); break;
      case BasisClass::Feature: a(k) = Scalar(2 * d.n_nodes) * s.a_f(bi.a, bi.b); break;
      case BasisClass::Node: a(k) = Scalar(2 * d.n_features) * s.a_n(bi.a, bi.b); break;
    }
  }
  return a;
}

template <typename Scalar>
StructuredCoef<Scalar> from_scaled(const Basis& basis, const Vec<Scalar>& a) {
  const GraphDims& d = basis.dims();
  if (a.size() != basis.size()) throw std::invalid_argument("from_scaled: length mismatch");
  StructuredCoef<Scalar> s = StructuredCoef<Scalar>::Zero(d);
  for (int k = 0; k < basis.size(); ++k) {
    const BasisIndex& bi = basis.index(k);
    switch (bi.cls) {
      case BasisClass::Diag: s.diag(bi.a, bi.b) = a(k); break;
      case BasisClass::Feature:
        s.a_f(bi.a, bi.b) = a(k) / Scalar(2 * d.n_nodes);
        s.a_f(bi.b, bi.a) = s.a_f(bi.a, bi.b);
        break;
      case BasisClass::Node:
        s.a_n(bi.a, bi.b) = a(k) / Scalar(2 * d.n_features);
        s.a_n(bi.b, bi.a) = s.a_n(bi.a, bi.b);
        break;
    }
  }
  return s;
}

}  // namespace prodgraph
