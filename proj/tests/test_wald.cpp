#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "prodgraph/sim.hpp"
#include "prodgraph/wald.hpp"
#include "test_util.hpp"

using namespace prodgraph;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using test_util::kron;
using test_util::random_matrix;

namespace {

/// Column-major flattening of a square matrix, matching vec(QVP^T) = (P (x) Q) vec(V).
VectorXd flatten(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

/// Feeds exact (v, A v) pairs so that gamma1 = A gamma0 identically.
CovState<double> exact_pairs_cov(const GraphDims& d, const MatrixXd& a, int extra,
                                 std::mt19937_64& rng) {
  CovState<double> cov(d, CovMode::Stationary);
  const int nf = d.state_size();
  for (int i = 0; i < nf; ++i) {
    const VectorXd v = VectorXd::Unit(nf, i);
    cov.update((a * v).eval(), v);
  }
  for (int i = 0; i < extra; ++i) {
    const VectorXd v = random_matrix(nf, 1, rng);
    cov.update((a * v).eval(), v);
  }
  return cov;
}

/// A model whose node graph is exactly zero (the joint null holds everywhere).
TrueModel<double> null_node_model(const GraphDims& d, std::uint64_t seed) {
  auto m = random_true_model<double>(d, 0.5, 1.0, 0.45, seed, 1.0);
  m.coef.a_n.setZero();
  m.edge_mask.setZero();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(assemble(m.coef));
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  const double c = 0.45 / norm;
  m.coef.diag *= c;
  m.coef.a_f *= c;
  return m;
}

std::vector<BasisIndex> first_node_entries(const Basis& basis, int p) {
  std::vector<BasisIndex> out;
  for (int k = basis.node_offset(); k < basis.node_offset() + p; ++k)
    out.push_back(basis.index(k));
  return out;
}

}  // namespace

TEST_CASE("projected OLS recovers an exactly realized coefficient") {
  const GraphDims d(3, 2, 1);
  Basis basis(d);
  std::mt19937_64 rng(3);
  const auto m = random_true_model<double>(d, 0.8, 1.0, 0.6, 5);
  const MatrixXd a_true = assemble(m.coef);
  auto cov = exact_pairs_cov(d, a_true, 10, rng);
  REQUIRE(cov.inverse_ready());
  const auto est = projected_ols(basis, cov);
  CHECK((assemble(est) - a_true).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projected OLS of an empty lag-1 covariance is zero") {
  const GraphDims d(3, 2, 1);
  Basis basis(d);
  std::mt19937_64 rng(5);
  CovState<double> cov(d, CovMode::Stationary);
  for (int i = 0; i < 12; ++i)
    cov.update(VectorXd::Zero(6), random_matrix(6, 1, rng).eval());
  REQUIRE(cov.inverse_ready());
  const auto est = projected_ols(basis, cov);
  CHECK(assemble(est).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("wald_sigma_n against the dense Kronecker oracle") {
  const GraphDims d(4, 2, 1);  // NF = 8
  Basis basis(d);
  const auto m = random_true_model<double>(d, 0.8, 1.0, 0.5, 7, 1.0);
  const auto x = simulate(m, 60, 100, 9);
  CovState<double> cov(d, CovMode::Stationary);
  for (long t = 1; t <= 60; ++t) cov.update(x.col(t), x.col(t - 1));
  REQUIRE(cov.inverse_ready());

  std::vector<BasisIndex> entries = first_node_entries(basis, basis.node_count());
  const auto q = wald_sigma_n(basis, cov, entries);

  const MatrixXd sigma_ols = kron(cov.gamma0_inv(), cov.residual_cov());
  for (size_t a = 0; a < entries.size(); ++a)
    for (size_t b = 0; b < entries.size(); ++b) {
      const MatrixXd ua = basis.materialize(entries[a].linear);
      const MatrixXd ub = basis.materialize(entries[b].linear);
      const double oracle = flatten(ua).dot(sigma_ols * flatten(ub));
      CHECK(q.sigma_w(a, b) == doctest::Approx(oracle).epsilon(1e-10));
    }
  CHECK((q.sigma_w - q.sigma_w.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("disjoint node pairs decouple under diagonal matrices") {
  const GraphDims d(4, 2, 1);
  Basis basis(d);
  // Build a tracker whose gamma0 is diagonal and whose gamma1 keeps the
  // residual diagonal: unit-direction predecessors with zero responses.
  CovState<double> cov(d, CovMode::Stationary);
  const int nf = d.state_size();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  for (int rep = 0; rep < 3; ++rep)
    for (int i = 0; i < nf; ++i)
      cov.update(VectorXd::Zero(nf), (unif(rng) * VectorXd::Unit(nf, i)).eval());
  REQUIRE(cov.inverse_ready());

  std::vector<BasisIndex> entries;
  for (int k = basis.node_offset(); k < basis.size(); ++k) {
    const auto& bi = basis.index(k);
    if ((bi.a == 0 && bi.b == 1) || (bi.a == 2 && bi.b == 3)) entries.push_back(bi);
  }
  REQUIRE(entries.size() == 2);
  const auto q = wald_sigma_n(basis, cov, entries);
  CHECK(std::abs(q.sigma_w(0, 1)) < 1e-14);
  CHECK(q.sigma_w(0, 0) > 0.0);
}

TEST_CASE("wald statistic reductions and two-path evaluation") {
  const GraphDims d(4, 2, 1);
  Basis basis(d);
  const auto m = random_true_model<double>(d, 0.8, 1.0, 0.5, 13, 1.0);
  const auto x = simulate(m, 80, 100, 15);
  CovState<double> cov(d, CovMode::Stationary);
  for (long t = 1; t <= 80; ++t) cov.update(x.col(t), x.col(t - 1));

  auto entries = first_node_entries(basis, 3);
  const auto q = wald_sigma_n(basis, cov, entries);

  CHECK(wald_statistic(VectorXd::Zero(3).eval(), q, 80) == 0.0);

  std::mt19937_64 rng(17);
  const VectorXd alpha = random_matrix(3, 1, rng);
  const double solve_path = wald_statistic(alpha, q, 80);
  const MatrixXd inv = q.sigma_w.inverse();
  const double explicit_path = 80.0 * alpha.dot(inv * alpha);
  CHECK(std::abs(solve_path - explicit_path) / std::abs(explicit_path) < 1e-9);

  // Scalar case: t * alpha^2 / sigma^2.
  auto single = first_node_entries(basis, 1);
  const auto q1 = wald_sigma_n(basis, cov, single);
  const double a0 = 0.37;
  CHECK(wald_statistic(VectorXd::Constant(1, a0).eval(), q1, 80) ==
        doctest::Approx(80.0 * a0 * a0 / q1.sigma_w(0, 0)).epsilon(1e-12));

  // Permutation invariance of the joint statistic.
  std::vector<BasisIndex> shuffled = entries;
  std::swap(shuffled[0], shuffled[2]);
  const auto qs = wald_sigma_n(basis, cov, shuffled);
  VectorXd alpha_s(3);
  alpha_s << alpha(2), alpha(1), alpha(0);
  CHECK(std::abs(wald_statistic(alpha_s, qs, 80) - solve_path) < 1e-10 * solve_path);
}

TEST_CASE("bisection agrees with the exhaustive linear scan") {
  const GraphDims d(5, 2, 1);
  Basis basis(d);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto m = random_true_model<double>(d, 0.25, 1.0, 0.5, seed, 1.0);
    const auto x = simulate(m, 400, 150, seed + 100);
    CovState<double> cov(d, CovMode::Stationary);
    for (long t = 1; t <= 400; ++t) cov.update(x.col(t), x.col(t - 1));
    REQUIRE(cov.inverse_ready());
    const auto est = bisection_sparsify(basis, cov, 0.1);

    // Linear-scan oracle: accept prefixes until the first rejection.
    const long t = cov.t();
    int p0 = 0;
    for (int p = 1; p <= basis.node_count(); ++p) {
      std::vector<BasisIndex> head(est.sorted_entries.begin(), est.sorted_entries.begin() + p);
      VectorXd alpha(p);
      for (int i = 0; i < p; ++i) alpha(i) = est.projected.a_n(head[i].a, head[i].b);
      const auto q = wald_sigma_n(basis, cov, head);
      const double stat = wald_statistic(alpha, q, t);
      if (stat > chi2_quantile(p, 0.9)) break;
      p0 = p;
    }
    // Bisection presumes monotone acceptance; flag disagreement loudly.
    CHECK(est.p0 == p0);
    // Sparsified support is a subset of the projected support.
    for (int a = 0; a < d.n_nodes; ++a)
      for (int b = 0; b < d.n_nodes; ++b)
        if (est.sparsified.a_n(a, b) != 0.0) CHECK(est.projected.a_n(a, b) != 0.0);
  }
}

TEST_CASE("strong signal keeps the estimate untouched") {
  const GraphDims d(4, 2, 1);
  Basis basis(d);
  auto m = random_true_model<double>(d, 1.0, 1.0, 0.6, 19, 0.05);
  // All node edges present with large values relative to the tiny noise.
  const auto x = simulate(m, 2000, 150, 21);
  CovState<double> cov(d, CovMode::Stationary);
  for (long t = 1; t <= 2000; ++t) cov.update(x.col(t), x.col(t - 1));
  const auto est = bisection_sparsify(basis, cov, 0.1);
  CHECK(est.p0 == 0);
  CHECK((est.sparsified.a_n - est.projected.a_n).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("null node graph is fully zeroed at roughly the nominal rate") {
  const GraphDims d(3, 2, 1);
  Basis basis(d);
  int zeroed = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const auto m = null_node_model(d, 500 + rep);
    const auto x = simulate(m, 3000, 150, 900 + rep);
    CovState<double> cov(d, CovMode::Stationary);
    for (long t = 1; t <= 3000; ++t) cov.update(x.col(t), x.col(t - 1));
    const auto est = bisection_sparsify(basis, cov, 0.1);
    if (est.sparsified.a_n.cwiseAbs().maxCoeff() == 0.0) ++zeroed;
  }
  // Full zeroing happens when H0(|K_N|) is accepted: probability ~ 0.9.
  CHECK(zeroed >= int(0.82 * reps));
  CHECK(zeroed <= int(0.97 * reps));
}

TEST_CASE("wald statistics follow the chi-square law under the null") {
  const GraphDims d(4, 3, 1);  // NF = 12
  Basis basis(d);
  const int reps = 500;
  const long horizon = 2000;
  for (int P : {1, 3}) {
    std::vector<double> stats;
    stats.reserve(reps);
    const auto entries = first_node_entries(basis, P);
    for (int rep = 0; rep < reps; ++rep) {
      const auto m = null_node_model(d, 3000 + rep);
      const auto x = simulate(m, horizon, 150, 5000 + rep);
      CovState<double> cov(d, CovMode::Stationary);
      for (long t = 1; t <= horizon; ++t) cov.update(x.col(t), x.col(t - 1));
      VectorXd alpha(P);
      const auto proj = projected_ols(basis, cov);
      for (int i = 0; i < P; ++i) alpha(i) = proj.a_n(entries[i].a, entries[i].b);
      const auto q = wald_sigma_n(basis, cov, entries);
      stats.push_back(wald_statistic(alpha, q, horizon));
    }
    std::sort(stats.begin(), stats.end());
    double dmax = 0;
    for (int i = 0; i < reps; ++i) {
      const double cdf = chi2_cdf(stats[i], P);
      dmax = std::max(dmax, std::max(std::abs(cdf - double(i) / reps),
                                     std::abs(cdf - double(i + 1) / reps)));
    }
    CHECK(dmax < 1.628 / std::sqrt(double(reps)));  // KS critical value at 0.01
  }
}

TEST_CASE("the F-statistic variant agrees with chi-square at large t") {
  const GraphDims d(4, 2, 1);
  Basis basis(d);
  const auto m = random_true_model<double>(d, 0.3, 1.0, 0.5, 23, 1.0);
  const auto x = simulate(m, 5000, 150, 25);
  CovState<double> cov(d, CovMode::Stationary);
  for (long t = 1; t <= 5000; ++t) cov.update(x.col(t), x.col(t - 1));
  WaldOptions f_opt;
  f_opt.use_f_statistic = true;
  const auto chi = bisection_sparsify(basis, cov, 0.1);
  const auto fv = bisection_sparsify(basis, cov, 0.1, f_opt);
  CHECK(chi.p0 == fv.p0);
}

TEST_CASE("trend estimation") {
  const GraphDims d(2, 2, 4);
  auto m = random_true_model<double>(d, 0.5, 1.0, 0.5, 27, 1.0, 1.0);
  m.coef = StructuredCoef<double>::Zero(d);
  m.spectral_norm = 0.0;
  m.noise_cov = 1e-30 * Eigen::MatrixXd::Identity(4, 4);

  const auto x = simulate(m, 9, 0, 29);
  CovState<double> cov(d, CovMode::Augmented);
  for (long t = 1; t <= 3; ++t) cov.update(x.col(t), x.col(t - 1));
  CHECK_THROWS_AS(trend_estimate(cov), std::runtime_error);  // phase 3 unseen

  for (long t = 4; t <= 4; ++t) cov.update(x.col(t), x.col(t - 1));
  const auto b = trend_estimate(cov);
  for (int mm = 0; mm < 4; ++mm)
    CHECK((b.row(mm).transpose() - m.trend.row(mm).transpose()).cwiseAbs().maxCoeff() < 1e-12);

  // Running-mean contraction: consecutive same-phase estimates differ by
  // O(1/p); here the stream is exactly periodic so they are equal.
  for (long t = 5; t <= 9; ++t) cov.update(x.col(t), x.col(t - 1));
  const auto b2 = trend_estimate(cov);
  CHECK((b2 - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trend estimate contracts at rate 1/p on noisy streams") {
  const GraphDims d(2, 2, 3);
  const auto m = random_true_model<double>(d, 0.5, 1.0, 0.5, 31, 1.0, 1.0);
  const auto x = simulate(m, 62, 100, 33);
  CovState<double> cov(d, CovMode::Augmented);
  for (long t = 1; t <= 60; ++t) cov.update(x.col(t), x.col(t - 1));
  const auto b60 = trend_estimate(cov);
  const long p_before = cov.phase_count(phase_mod(61, 3));
  cov.update(x.col(61), x.col(60));
  cov.update(x.col(62), x.col(61));
  const auto b62 = trend_estimate(cov);
  // Only the phase whose predecessor mean absorbed a new sample moved, by
  // (x - mean) / (p + 1).
  const double moved = (b62 - b60).cwiseAbs().maxCoeff();
  const double bound =
      (x.cwiseAbs().maxCoeff() + b60.cwiseAbs().maxCoeff()) / double(p_before);
  CHECK(moved <= bound);
}
