#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "prodgraph/structured.hpp"

namespace prodgraph {

enum class CovMode { Stationary, Augmented };

/**
 * Streaming sample autocovariances of a (possibly trend-augmented) AR(1)
 * stream, with a maintained inverse of the lag-0 matrix.
 *
 * Stationary mode accumulates
 *   G0_t = (1/t) sum x_{tau-1} x_{tau-1}^T,   G1_t = (1/t) sum x_tau x_{tau-1}^T.
 * Augmented mode accumulates the per-phase centered versions via exact
 * per-phase Welford updates, weighting each increment by p/(p+1) where p is
 * the count of the arriving sample's phase, and maintains the per-phase
 * predecessor means that double as the trend estimate.
 *
 * The inverse appears once t >= NF and the condition estimate is below 1e10;
 * it is then maintained by rank-1 updates, re-factorized every
 * `refactor_period` updates or when ||G0 * inv - I||_inf exceeds `drift_tol`.
 */
template <typename Scalar = double>
class CovState {
 public:
  CovState(const GraphDims& dims, CovMode mode)
      : dims_(dims), mode_(mode) {
    const int nf = dims.state_size();
    g0_ = Mat<Scalar>::Zero(nf, nf);
    g1_ = Mat<Scalar>::Zero(nf, nf);
    if (mode == CovMode::Augmented) {
      phase_count_.assign(dims.period, 0);
      pred_mean_.assign(dims.period, Vec<Scalar>::Zero(nf));
    }
    last_x_ = Vec<Scalar>::Zero(nf);
  }

  const GraphDims& dims() const { return dims_; }
  CovMode mode() const { return mode_; }
  long t() const { return t_; }
  const Mat<Scalar>& gamma0() const { return g0_; }
  const Mat<Scalar>& gamma1() const { return g1_; }
  bool inverse_ready() const { return g0_inv_.has_value(); }
  const Mat<Scalar>& gamma0_inv() const {
    if (!g0_inv_) throw std::runtime_error("CovState: gamma0 inverse not ready");
    return *g0_inv_;
  }

  /// Count p_{m,t} of samples observed in phase m (augmented mode).
  long phase_count(int m) const { return phase_count_.at(m); }
  /// underline-x_{j,t}: running mean of the phase-j samples already used as
  /// predecessors. Its sample count is phase_count((j+1) mod M).
  const Vec<Scalar>& pred_mean(int j) const { return pred_mean_.at(j); }
  bool phase_seen(int j) const { return phase_count_.at(phase_mod(j + 1, dims_.period)) > 0; }

  /// Most recent observation x_t (set by updates or `observe_initial`).
  const Vec<Scalar>& last_x() const { return last_x_; }
  bool has_initial() const { return has_initial_; }
  /// Records x_0 before any update so online drivers can pull x_prev from here.
  void observe_initial(const Vec<Scalar>& x0) {
    last_x_ = x0;
    has_initial_ = true;
  }

  void update(const Vec<Scalar>& x_new, const Vec<Scalar>& x_prev) {
    if (mode_ == CovMode::Stationary)
      update_stationary(x_new, x_prev);
    else
      update_augmented(x_new, x_prev);
  }

  void update_stationary(const Vec<Scalar>& x_new, const Vec<Scalar>& x_prev) {
    if (mode_ != CovMode::Stationary)
      throw std::logic_error("CovState: stationary update on augmented tracker");
    const Scalar t = Scalar(t_);
    g0_ = (t * g0_ + x_prev * x_prev.transpose()) / (t + 1);
    g1_ = (t * g1_ + x_new * x_prev.transpose()) / (t + 1);
    if (g0_inv_) {
      // (t+1)/t * [Inv - Inv x x^T Inv / (t + x^T Inv x)]
      const Vec<Scalar> u = (*g0_inv_) * x_prev;
      const Scalar denom = t + x_prev.dot(u);
      g0_inv_->noalias() -= u * (u.transpose() / denom);
      *g0_inv_ *= (t + 1) / t;
    }
    finish_update(x_new);
  }

  void update_augmented(const Vec<Scalar>& x_new, const Vec<Scalar>& x_prev) {
    if (mode_ != CovMode::Augmented)
      throw std::logic_error("CovState: augmented update on stationary tracker");
    const int M = dims_.period;
    const int m_bar = phase_mod(t_ + 1, M);
    const int j_prev = phase_mod(m_bar - 1, M);
    const Scalar t = Scalar(t_);
    const long p = phase_count_[m_bar];

    if (p > 0) {
      const Scalar w = Scalar(p) / Scalar(p + 1);
      const Vec<Scalar> c_prev = x_prev - pred_mean_[j_prev];
      const Vec<Scalar> c_new = x_new - pred_mean_[m_bar];
      g0_ = (t * g0_ + w * c_prev * c_prev.transpose()) / (t + 1);
      g1_ = (t * g1_ + w * c_new * c_prev.transpose()) / (t + 1);
      if (g0_inv_) {
        const Vec<Scalar> u = (*g0_inv_) * c_prev;
        const Scalar denom = t * (Scalar(1) + Scalar(1) / Scalar(p)) + c_prev.dot(u);
        g0_inv_->noalias() -= u * (u.transpose() / denom);
        *g0_inv_ *= (t + 1) / t;
      }
    } else {
      // First sample of this phase: zero weight, only the scale changes.
      g0_ *= t / (t + 1);
      g1_ *= t / (t + 1);
      if (g0_inv_) *g0_inv_ *= (t + 1) / t;
    }

    pred_mean_[j_prev] = (Scalar(p) * pred_mean_[j_prev] + x_prev) / Scalar(p + 1);
    phase_count_[m_bar] = p + 1;
    finish_update(x_new);
  }

  /// Residual covariance estimate G0 - G1 G0^{-1} G1^T, symmetrized.
  Mat<Scalar> residual_cov() const {
    if (!g0_inv_) throw std::runtime_error("CovState: gamma0 not yet invertible");
    Mat<Scalar> s = g0_ - g1_ * (*g0_inv_) * g1_.transpose();
    return ((s + s.transpose()) / Scalar(2)).eval();
  }

  Scalar inverse_drift() const {
    if (!g0_inv_) return Scalar(0);
    const int nf = dims_.state_size();
    return (g0_ * (*g0_inv_) - Mat<Scalar>::Identity(nf, nf)).cwiseAbs().maxCoeff();
  }

  void refactor_inverse() {
    const int nf = dims_.state_size();
    g0_inv_ = g0_.ldlt().solve(Mat<Scalar>::Identity(nf, nf)).eval();
    updates_since_refactor_ = 0;
  }

  static constexpr Scalar drift_tol = Scalar(1e-6);
  static constexpr long refactor_period = 512;
  static constexpr Scalar cond_gate = Scalar(1e10);

 private:
  void finish_update(const Vec<Scalar>& x_new) {
    t_ += 1;
    last_x_ = x_new;
    has_initial_ = true;
    if (!g0_inv_) {
      maybe_open_gate();
      return;
    }
    ++updates_since_refactor_;
    if (updates_since_refactor_ >= refactor_period || inverse_drift() > drift_tol)
      refactor_inverse();
  }

  void maybe_open_gate() {
    if (t_ < dims_.state_size()) return;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(g0_);
    const Scalar lo = es.eigenvalues().minCoeff();
    const Scalar hi = es.eigenvalues().maxCoeff();
    if (lo <= Scalar(0) || hi / lo > cond_gate) return;
    g0_inv_ = (es.eigenvectors() *
               es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose())
                  .eval();
    updates_since_refactor_ = 0;
  }

  GraphDims dims_;
  CovMode mode_;
  long t_ = 0;
  Mat<Scalar> g0_, g1_;
  std::optional<Mat<Scalar>> g0_inv_;
  std::vector<long> phase_count_;
  std::vector<Vec<Scalar>> pred_mean_;
  Vec<Scalar> last_x_;
  bool has_initial_ = false;
  long updates_since_refactor_ = 0;
};

}  // namespace prodgraph
