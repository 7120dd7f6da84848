#pragma once

#include <Eigen/Dense>

#include "prodgraph/basis.hpp"
#include "prodgraph/covariance.hpp"
#include "prodgraph/structured.hpp"

namespace prodgraph {

/**
 * Gram system of the structured Lasso in the scaled coordinates a^s:
 *   gamma0_big(k, k') = <U_k, U_{k'} G0_t>,   gamma1_big(k) = <U_k, G1_t>.
 * Equals (1/t) sum_tau Xt_{tau-1} Xt_{tau-1}^T over the reorganized sample
 * tiles, hence symmetric positive semidefinite. `t` records the sample count
 * the averages run over.
 */
template <typename Scalar = double>
struct BigGram {
  Mat<Scalar> gamma0_big;
  Vec<Scalar> gamma1_big;
  long t = 0;
};

/// Contracts a pair of raw autocovariance matrices through the basis index
/// patterns.
template <typename Scalar>
BigGram<Scalar> build_big_gram(const Basis& basis, const Mat<Scalar>& gamma0,
                               const Mat<Scalar>& gamma1, long t) {
  BigGram<Scalar> g;
  const int K = basis.size();
  g.gamma0_big.resize(K, K);
  g.gamma1_big.resize(K);
  g.t = t;
  for (int k = 0; k < K; ++k) {
    for (int kp = 0; kp <= k; ++kp) {
      const Scalar v = basis.gram_entry(gamma0, k, kp);
      g.gamma0_big(k, kp) = v;
      g.gamma0_big(kp, k) = v;
    }
    g.gamma1_big(k) = basis.inner(gamma1, k);
  }
  return g;
}

/// Contracts the tracker's autocovariances. In augmented mode the tracker's
/// matrices are already phase-centered, so the same contraction yields the
/// augmented system.
template <typename Scalar>
BigGram<Scalar> build_big_gram(const Basis& basis, const CovState<Scalar>& cov) {
  return build_big_gram(basis, cov.gamma0(), cov.gamma1(), cov.t());
}

/// Reorganized sample tile: row k is [U_k]_{i,:} x over response coordinates i.
template <typename Scalar>
Mat<Scalar> response_tile(const Basis& basis, const Vec<Scalar>& x) {
  const int K = basis.size();
  const int nf = basis.dims().state_size();
  Mat<Scalar> tile = Mat<Scalar>::Zero(K, nf);
  for (int k = 0; k < K; ++k) {
    const Scalar w = Scalar(basis.weight(k));
    for (const auto& [r, c] : basis.pattern(k)) tile(k, r) = w * x(c);
  }
  return tile;
}

/// Tile plus the new responses it grows into the objective; both are
/// phase-mean centered in augmented mode.
template <typename Scalar = double>
struct ResponseTile {
  Mat<Scalar> x_tile;  ///< |K| x NF
  Vec<Scalar> x_next;  ///< NF responses
};

}  // namespace prodgraph
