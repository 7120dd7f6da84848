#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Relative Frobenius deviation ||assemble(est) - assemble(truth)|| / ||assemble(truth)||.
template <typename Scalar>
Scalar rmsd(const StructuredCoef<Scalar>& est, const StructuredCoef<Scalar>& truth) {
  const Mat<Scalar> a_est = assemble(est);
  const Mat<Scalar> a_true = assemble(truth);
  const Scalar denom = a_true.norm();
  if (denom == Scalar(0)) throw std::invalid_argument("rmsd: zero-norm truth");
  return (a_est - a_true).norm() / denom;
}

/// Running average of normalized one-step prediction errors
/// ||x_next - b - A x_cur|| / ||x_next||. Zero-norm targets are skipped and
/// counted separately.
template <typename Scalar = double>
struct PredErrAccum {
  Scalar sum = 0;
  long count = 0;
  long skipped = 0;

  void add(const Vec<Scalar>& x_next, const Vec<Scalar>& x_cur,
           const StructuredCoef<Scalar>& est, const Vec<Scalar>* trend_b = nullptr) {
    const Scalar denom = x_next.norm();
    if (denom == Scalar(0)) {
      ++skipped;
      return;
    }
    const int n = est.n_nodes(), f = est.n_features();
    Vec<Scalar> pred = vec(apply_structured(est, ivec(x_cur, n, f)));
    if (trend_b) pred += *trend_b;
    sum += (x_next - pred).norm() / denom;
    ++count;
  }

  Scalar value() const { return count > 0 ? sum / Scalar(count) : Scalar(0); }
};

}  // namespace prodgraph
