#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Ground truth for synthetic experiments: structured coefficient, periodic
/// trend and noise covariance of the latent stationary AR(1) process.
template <typename Scalar = double>
struct TrueModel {
  GraphDims dims;
  StructuredCoef<Scalar> coef;
  Mat<Scalar> trend;          ///< M x NF, row m is b^0_m in vec order; zero when M = 1
  Mat<Scalar> noise_cov;      ///< NF x NF symmetric positive definite
  Scalar spectral_norm = 0;   ///< ||assemble(coef)||_2, < 1 for stationarity
  Eigen::MatrixXi edge_mask;  ///< N x N, 1 where a_n is structurally nonzero

  void validate() const {
    coef.validate();
    if (!(spectral_norm < Scalar(1))) throw std::invalid_argument("TrueModel: ||A||_2 must be < 1");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(noise_cov);
    if (es.eigenvalues().minCoeff() <= Scalar(0))
      throw std::invalid_argument("TrueModel: noise covariance must be positive definite");
  }
};

/// Draws a sparse spatial graph, a dense feature graph and a free diagonal,
/// then rescales the assembled matrix to the requested spectral norm. Trends
/// are random sinusoids with an offset, sampled at M points (zero when M = 1).
template <typename Scalar = double>
TrueModel<Scalar> random_true_model(const GraphDims& dims, double edge_density,
                                    double value_scale, double target_norm, std::uint64_t seed,
                                    double noise_scale = 1.0, double trend_scale = 1.0) {
  if (edge_density <= 0.0 || edge_density > 1.0)
    throw std::invalid_argument("random_true_model: edge_density must be in (0, 1]");
  if (target_norm <= 0.0 || target_norm >= 1.0)
    throw std::invalid_argument("random_true_model: target_norm must be in (0, 1)");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-value_scale, value_scale);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TrueModel<Scalar> model;
  model.dims = dims;
  model.coef = StructuredCoef<Scalar>::Zero(dims);
  model.edge_mask = Eigen::MatrixXi::Zero(dims.n_nodes, dims.n_nodes);

  for (int n = 0; n < dims.n_nodes; ++n)
    for (int f = 0; f < dims.n_features; ++f) model.coef.diag(n, f) = Scalar(unif(rng));
  for (int a = 0; a < dims.n_features; ++a)
    for (int b = a + 1; b < dims.n_features; ++b) {
      const Scalar v = Scalar(unif(rng));
      model.coef.a_f(a, b) = v;
      model.coef.a_f(b, a) = v;
    }
  for (int a = 0; a < dims.n_nodes; ++a)
    for (int b = a + 1; b < dims.n_nodes; ++b) {
      if (unit(rng) <= edge_density) {
        const Scalar v = Scalar(unif(rng));
        model.coef.a_n(a, b) = v;
        model.coef.a_n(b, a) = v;
        model.edge_mask(a, b) = model.edge_mask(b, a) = 1;
      }
    }

  // The assembled matrix is symmetric, so the spectral norm is the largest
  // absolute eigenvalue.
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(assemble(model.coef));
  const Scalar norm = es.eigenvalues().cwiseAbs().maxCoeff();
  if (norm > Scalar(0)) {
    const Scalar c = Scalar(target_norm) / norm;
    model.coef.diag *= c;
    model.coef.a_f *= c;
    model.coef.a_n *= c;
  }
  model.spectral_norm = Scalar(target_norm);

  const int nf = dims.state_size();
  model.trend = Mat<Scalar>::Zero(dims.period, nf);
  if (dims.period > 1) {
    std::uniform_real_distribution<double> amp(0.5, 1.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> offset(-1.0, 1.0);
    for (int i = 0; i < nf; ++i) {
      const double a = trend_scale * amp(rng);
      const double p = phase(rng);
      const double o = trend_scale * offset(rng);
      for (int m = 0; m < dims.period; ++m)
        model.trend(m, i) = Scalar(o + a * std::sin(2.0 * M_PI * m / dims.period + p));
    }
  }

  model.noise_cov = Scalar(noise_scale * noise_scale) * Mat<Scalar>::Identity(nf, nf);
  return model;
}

/// Incremental stream position: time index, last emitted observation and the
/// latent stationary state behind it.
template <typename Scalar = double>
struct StreamState {
  long t = 0;
  Vec<Scalar> x_prev;        ///< last emitted x_t
  Vec<Scalar> x_prime_prev;  ///< latent stationary state x'_t
  std::uint64_t rng_seed = 0;
};

/// Sample generator for the (possibly trend-augmented) structured AR(1)
/// model. The latent state is initialized by a burn-in from zero, a truncated
/// stand-in for the infinite moving-average start.
template <typename Scalar = double>
class StreamSimulator {
 public:
  StreamSimulator(const TrueModel<Scalar>& model, long burn_in, std::uint64_t seed)
      : model_(model), rng_(seed), gauss_(0.0, 1.0) {
    const int nf = model.dims.state_size();
    Eigen::LLT<Mat<Scalar>> llt(model.noise_cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("StreamSimulator: noise covariance not positive definite");
    noise_chol_ = llt.matrixL();
    a_dense_ = assemble(model.coef);
    state_.rng_seed = seed;
    state_.x_prime_prev = Vec<Scalar>::Zero(nf);
    for (long i = 0; i < burn_in; ++i)
      state_.x_prime_prev = a_dense_ * state_.x_prime_prev + draw_noise();
    state_.t = 0;
    state_.x_prev = trend_at(0) + state_.x_prime_prev;
  }

  /// Default burn-in from the geometric mixing rate of the process.
  static long default_burn_in(Scalar spectral_norm) {
    return static_cast<long>(std::ceil(10.0 / (1.0 - static_cast<double>(spectral_norm))));
  }

  const StreamState<Scalar>& state() const { return state_; }
  /// x_t for the current t (x_0 right after construction).
  const Vec<Scalar>& current() const { return state_.x_prev; }

  /// Advances to t+1 and returns x_{t+1}.
  const Vec<Scalar>& next() {
    state_.x_prime_prev = a_dense_ * state_.x_prime_prev + draw_noise();
    state_.t += 1;
    state_.x_prev = trend_at(state_.t) + state_.x_prime_prev;
    return state_.x_prev;
  }

 private:
  Vec<Scalar> draw_noise() {
    Vec<Scalar> z(model_.dims.state_size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = Scalar(gauss_(rng_));
    return noise_chol_ * z;
  }
  Vec<Scalar> trend_at(long t) const {
    return model_.trend.row(phase_mod(t, model_.dims.period)).transpose();
  }

  TrueModel<Scalar> model_;
  Mat<Scalar> a_dense_;
  Mat<Scalar> noise_chol_;
  StreamState<Scalar> state_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

/// Full trajectory x_0 .. x_{t_total} as columns of an NF x (t_total + 1) matrix.
template <typename Scalar = double>
Mat<Scalar> simulate(const TrueModel<Scalar>& model, long t_total, long burn_in,
                     std::uint64_t seed) {
  if (t_total < 1) throw std::invalid_argument("simulate: t_total must be >= 1");
  StreamSimulator<Scalar> sim(model, burn_in, seed);
  Mat<Scalar> out(model.dims.state_size(), t_total + 1);
  out.col(0) = sim.current();
  for (long t = 1; t <= t_total; ++t) out.col(t) = sim.next();
  return out;
}

}  // namespace prodgraph
