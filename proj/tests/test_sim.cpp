#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "prodgraph/covariance.hpp"
#include "prodgraph/sim.hpp"
#include "test_util.hpp"

using namespace prodgraph;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Fixed point of G = A G A^T + S by iteration; converges for ||A||_2 < 1.
MatrixXd lyapunov_fixed_point(const MatrixXd& a, const MatrixXd& s, int iters = 2000) {
  MatrixXd g = s;
  for (int i = 0; i < iters; ++i) g = (a * g * a.transpose() + s).eval();
  return g;
}

}  // namespace

TEST_CASE("random_true_model hits the target spectral norm exactly") {
  const GraphDims d(6, 3, 4);
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    const auto m = random_true_model<double>(d, 0.3, 1.0, 0.55, seed);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(assemble(m.coef));
    CHECK(std::abs(es.eigenvalues().cwiseAbs().maxCoeff() - 0.55) < 1e-10);
    m.validate();
  }
}

TEST_CASE("random_true_model density and determinism") {
  const GraphDims d(5, 2, 1);
  const auto full = random_true_model<double>(d, 1.0, 1.0, 0.5, 3);
  for (int a = 0; a < d.n_nodes; ++a)
    for (int b = a + 1; b < d.n_nodes; ++b) CHECK(full.edge_mask(a, b) == 1);

  const auto m1 = random_true_model<double>(d, 0.4, 1.0, 0.5, 42);
  const auto m2 = random_true_model<double>(d, 0.4, 1.0, 0.5, 42);
  CHECK(m1.coef.diag == m2.coef.diag);
  CHECK(m1.coef.a_f == m2.coef.a_f);
  CHECK(m1.coef.a_n == m2.coef.a_n);
  CHECK(m1.trend == m2.trend);

  CHECK_THROWS_AS(random_true_model<double>(d, 0.4, 1.0, 1.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_true_model<double>(d, 0.0, 1.0, 0.5, 1), std::invalid_argument);
}

TEST_CASE("simulate degenerate cases") {
  const GraphDims d(3, 2, 1);
  auto m = random_true_model<double>(d, 0.5, 1.0, 0.5, 7);
  m.coef = StructuredCoef<double>::Zero(d);
  m.spectral_norm = 0.0;
  m.noise_cov = 1e-30 * MatrixXd::Identity(d.state_size(), d.state_size());
  const auto x = simulate(m, 20, 10, 5);
  CHECK(x.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulate pure trend is exactly periodic") {
  const GraphDims d(2, 2, 5);
  auto m = random_true_model<double>(d, 0.5, 1.0, 0.5, 11);
  m.coef = StructuredCoef<double>::Zero(d);
  m.spectral_norm = 0.0;
  m.noise_cov = 1e-30 * MatrixXd::Identity(d.state_size(), d.state_size());
  const auto x = simulate(m, 23, 0, 17);
  for (long t = 0; t <= 23; ++t) {
    const VectorXd expect = m.trend.row(phase_mod(t, 5)).transpose();
    CHECK((x.col(t) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (long t = 0; t + 5 <= 23; ++t)
    CHECK((x.col(t) - x.col(t + 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulated covariance matches the Lyapunov oracle") {
  const GraphDims d(3, 2, 1);
  const auto m = random_true_model<double>(d, 0.8, 1.0, 0.5, 13, /*noise=*/1.0);
  const long t_total = 50000;
  const auto x = simulate(m, t_total, 500, 23);

  MatrixXd sample = MatrixXd::Zero(d.state_size(), d.state_size());
  for (long t = 0; t <= t_total; ++t) sample += x.col(t) * x.col(t).transpose();
  sample /= double(t_total + 1);

  const MatrixXd oracle = lyapunov_fixed_point(assemble(m.coef), m.noise_cov);
  CHECK((sample - oracle).norm() / oracle.norm() < 0.05);
}

TEST_CASE("empirical OLS recovers the coefficient on long stationary runs") {
  const GraphDims d(4, 2, 1);
  const auto m = random_true_model<double>(d, 0.6, 1.0, 0.5, 17, 1.0);
  const long t_total = 20L * d.state_size() * d.state_size();
  const auto x = simulate(m, t_total, 300, 29);

  CovState<double> cov(d, CovMode::Stationary);
  for (long t = 1; t <= t_total; ++t) cov.update(x.col(t), x.col(t - 1));
  REQUIRE(cov.inverse_ready());
  const MatrixXd a_hat = cov.gamma1() * cov.gamma0_inv();
  const MatrixXd a_true = assemble(m.coef);
  CHECK((a_hat - a_true).norm() / a_true.norm() < 0.1);
}

TEST_CASE("streaming and batch simulation agree") {
  const GraphDims d(3, 2, 4);
  const auto m = random_true_model<double>(d, 0.5, 1.0, 0.5, 19);
  const auto batch = simulate(m, 50, 64, 31);
  StreamSimulator<double> sim(m, 64, 31);
  CHECK((sim.current() - batch.col(0)).cwiseAbs().maxCoeff() == 0.0);
  for (long t = 1; t <= 50; ++t)
    CHECK((sim.next() - batch.col(t)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sim.state().t == 50);
}
