#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "prodgraph/covariance.hpp"
#include "prodgraph/special.hpp"
#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Projected OLS estimate Proj_G(G1 G0^{-1}); identical formula in both
/// tracker modes because the augmented autocovariances are already centered.
template <typename Scalar>
StructuredCoef<Scalar> projected_ols(const Basis& basis, const CovState<Scalar>& cov) {
  const Mat<Scalar> a_ols = cov.gamma1() * cov.gamma0_inv();
  return project_graph(basis, a_ols);
}

/// Joint asymptotic covariance of selected node-edge estimates.
template <typename Scalar = double>
struct WaldCovQuery {
  std::vector<BasisIndex> entry_set;
  Mat<Scalar> sigma_w;
};

/**
 * Sigma_W for a set of node edges: entries vec(U_k)^T [G0^{-1} (x) Sigma] vec(U_k'),
 * contracted over the basis index patterns instead of forming the Kronecker
 * product. For edges (i, j) and (i', j') the contraction collapses to four
 * F x F block inner products between the residual covariance and the inverse
 * autocovariance, restricted to the per-node index sets {f*N + n : f}.
 */
template <typename Scalar>
WaldCovQuery<Scalar> wald_sigma_n(const Basis& basis, const CovState<Scalar>& cov,
                                  const std::vector<BasisIndex>& entries) {
  const GraphDims& d = basis.dims();
  const int n = d.n_nodes, f = d.n_features;
  const Mat<Scalar>& g_inv = cov.gamma0_inv();
  const Mat<Scalar> sigma = cov.residual_cov();

  auto block = [&](const Mat<Scalar>& m, int na, int nb) {
    Mat<Scalar> out(f, f);
    for (int fa = 0; fa < f; ++fa)
      for (int fb = 0; fb < f; ++fb) out(fa, fb) = m(fa * n + na, fb * n + nb);
    return out;
  };

  WaldCovQuery<Scalar> q;
  q.entry_set = entries;
  const int P = static_cast<int>(entries.size());
  q.sigma_w.resize(P, P);
  const Scalar pref = Scalar(1) / Scalar(4 * f * f);
  for (int a = 0; a < P; ++a) {
    if (entries[a].cls != BasisClass::Node)
      throw std::invalid_argument("wald_sigma_n: entries must index node edges");
    const int i = entries[a].a, j = entries[a].b;
    for (int b = 0; b <= a; ++b) {
      const int ip = entries[b].a, jp = entries[b].b;
      const Scalar v =
          pref * (block(sigma, i, ip).cwiseProduct(block(g_inv, j, jp)).sum() +
                  block(sigma, j, jp).cwiseProduct(block(g_inv, i, ip)).sum() +
                  block(sigma, i, jp).cwiseProduct(block(g_inv, j, ip)).sum() +
                  block(sigma, j, ip).cwiseProduct(block(g_inv, i, jp)).sum());
      q.sigma_w(a, b) = v;
      q.sigma_w(b, a) = v;
    }
  }
  return q;
}

/// t * alpha^T Sigma_W^{-1} alpha via a solve; `ridge` > 0 regularizes an
/// ill-conditioned joint covariance.
template <typename Scalar>
Scalar wald_statistic(const Vec<Scalar>& alpha, const WaldCovQuery<Scalar>& query, long t,
                      Scalar ridge = Scalar(0)) {
  if (alpha.size() != query.sigma_w.rows())
    throw std::invalid_argument("wald_statistic: size mismatch");
  Mat<Scalar> s = query.sigma_w;
  if (ridge > Scalar(0)) s.diagonal().array() += ridge;
  Eigen::LDLT<Mat<Scalar>> ldlt(s);
  const Vec<Scalar> x = ldlt.solve(alpha);
  const Scalar resid = (s * x - alpha).cwiseAbs().maxCoeff();
  const Scalar scale = std::max(alpha.cwiseAbs().maxCoeff(), Scalar(1e-300));
  if (ldlt.info() != Eigen::Success || resid > Scalar(1e-6) * scale)
    throw std::runtime_error("wald_statistic: singular joint covariance");
  return Scalar(t) * alpha.dot(x);
}

/// Sparsified projected OLS estimate with the accepted-null bookkeeping.
template <typename Scalar = double>
struct WaldEstimate {
  StructuredCoef<Scalar> projected;
  StructuredCoef<Scalar> sparsified;
  int p0 = 0;                            ///< largest accepted joint-null size
  std::vector<BasisIndex> sorted_entries;  ///< node entries by ascending |estimate|
  bool ridge_fallback = false;           ///< a singular Sigma_W needed a ridge
};

struct WaldOptions {
  bool use_f_statistic = false;  ///< lambda_W / P against F(P, t - NF - 1) quantiles
  double ridge = 1e-10;
};

/**
 * Bisection sparsification: sorts |a_n| ascending (ties by basis index),
 * tests the joint nulls H0(1) and H0(|K_N|); if both hold the node graph is
 * zeroed, if neither holds it is kept, otherwise bisection finds the largest
 * accepted prefix p0 and zeroes those entries. Each probe is a fresh joint
 * Wald test of the p smallest entries.
 */
template <typename Scalar>
WaldEstimate<Scalar> bisection_sparsify(const Basis& basis, const CovState<Scalar>& cov,
                                        double significance, const WaldOptions& opt = {}) {
  if (significance <= 0.0 || significance >= 1.0)
    throw std::invalid_argument("bisection_sparsify: significance must be in (0, 1)");
  WaldEstimate<Scalar> est;
  est.projected = projected_ols(basis, cov);
  est.sparsified = est.projected;
  const long t = cov.t();
  const int kn = basis.node_count();
  if (kn == 0) return est;

  est.sorted_entries.reserve(kn);
  for (int k = basis.node_offset(); k < basis.size(); ++k)
    est.sorted_entries.push_back(basis.index(k));
  std::sort(est.sorted_entries.begin(), est.sorted_entries.end(),
            [&](const BasisIndex& x, const BasisIndex& y) {
              const Scalar ax = std::abs(est.projected.a_n(x.a, x.b));
              const Scalar ay = std::abs(est.projected.a_n(y.a, y.b));
              if (ax != ay) return ax < ay;
              return x.linear < y.linear;
            });

  auto accepted = [&](int p) {
    std::vector<BasisIndex> head(est.sorted_entries.begin(), est.sorted_entries.begin() + p);
    Vec<Scalar> alpha(p);
    for (int i = 0; i < p; ++i) alpha(i) = est.projected.a_n(head[i].a, head[i].b);
    const WaldCovQuery<Scalar> q = wald_sigma_n(basis, cov, head);
    Scalar stat;
    try {
      stat = wald_statistic(alpha, q, t);
    } catch (const std::runtime_error&) {
      stat = wald_statistic(alpha, q, t, Scalar(opt.ridge));
      est.ridge_fallback = true;
    }
    if (opt.use_f_statistic) {
      const long dof2 = t - basis.dims().state_size() - 1;
      if (dof2 >= 1)
        return static_cast<double>(stat) / p <= f_quantile(p, static_cast<int>(dof2),
                                                           1.0 - significance);
    }
    return static_cast<double>(stat) <= chi2_quantile(p, 1.0 - significance);
  };

  const bool low_ok = accepted(1);
  const bool high_ok = kn == 1 ? low_ok : accepted(kn);
  int p0 = 0;
  if (low_ok && high_ok) {
    p0 = kn;
  } else if (!low_ok) {
    p0 = 0;
  } else {
    int pl = 1, pr = kn;  // accepted at pl, rejected at pr
    while (pl + 1 < pr) {
      const int pm = (pl + pr) / 2;
      if (accepted(pm))
        pl = pm;
      else
        pr = pm;
    }
    p0 = pl;
  }

  est.p0 = p0;
  for (int i = 0; i < p0; ++i) {
    const BasisIndex& e = est.sorted_entries[i];
    est.sparsified.a_n(e.a, e.b) = Scalar(0);
    est.sparsified.a_n(e.b, e.a) = Scalar(0);
  }
  return est;
}

/// Per-phase predecessor means as the trend estimate, M x NF.
template <typename Scalar>
Mat<Scalar> trend_estimate(const CovState<Scalar>& cov) {
  if (cov.mode() != CovMode::Augmented)
    throw std::logic_error("trend_estimate: tracker is not in augmented mode");
  const int M = cov.dims().period;
  Mat<Scalar> b(M, cov.dims().state_size());
  for (int m = 0; m < M; ++m) {
    if (!cov.phase_seen(m))
      throw std::runtime_error("trend_estimate: phase " + std::to_string(m) +
                               " not yet observed");
    b.row(m) = cov.pred_mean(m).transpose();
  }
  return b;
}

}  // namespace prodgraph
