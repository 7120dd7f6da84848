#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "prodgraph/big_gram.hpp"
#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Quadratic data term plus the partial l1 penalty lambda * F * ||A_N||_1 on
/// the node graph, over the structured coefficient space.
template <typename Scalar = double>
struct BatchProblem {
  GraphDims dims;
  Mat<Scalar> gamma0;  ///< NF x NF lag-0 sample autocovariance
  Mat<Scalar> gamma1;  ///< NF x NF lag-1 sample autocovariance
  Scalar lambda = 0;
  Scalar scale_f;      ///< the F multiplier in the penalty

  BatchProblem(const GraphDims& d, Mat<Scalar> g0, Mat<Scalar> g1, Scalar lam)
      : dims(d), gamma0(std::move(g0)), gamma1(std::move(g1)), lambda(lam),
        scale_f(Scalar(d.n_features)) {
    if (lambda < Scalar(0)) throw std::invalid_argument("BatchProblem: lambda must be >= 0");
  }

  template <typename S>
  static BatchProblem from_cov(const CovState<S>& cov, Scalar lam) {
    return BatchProblem(cov.dims(), cov.gamma0(), cov.gamma1(), lam);
  }
};

/// 1/2 <A G0, A> - <G1, A> + lambda * F * ||A_N||_1, the sample objective up
/// to the data constant (which never affects comparisons).
template <typename Scalar>
Scalar objective(const BatchProblem<Scalar>& p, const StructuredCoef<Scalar>& s) {
  const Mat<Scalar> A = assemble(s);
  const Scalar quad = Scalar(0.5) * (A * p.gamma0).cwiseProduct(A).sum() -
                      p.gamma1.cwiseProduct(A).sum();
  return quad + p.lambda * p.scale_f * s.a_n.cwiseAbs().sum();
}

/// Stationarity residual of the optimality system in the scaled coordinates:
/// the residual r = Gamma0 a^s - gamma1 must vanish on unpenalized and active
/// rows (up to the lambda * sign term) and stay within lambda on inactive ones.
template <typename Scalar>
Scalar kkt_residual_scaled(const Basis& basis, const Mat<Scalar>& gamma0_big,
                           const Vec<Scalar>& gamma1_big, const Vec<Scalar>& a_scaled,
                           Scalar lambda) {
  const Vec<Scalar> r = gamma0_big * a_scaled - gamma1_big;
  Scalar worst = 0;
  const int n0 = basis.node_offset();
  for (int k = 0; k < n0; ++k) worst = std::max(worst, std::abs(r(k)));
  for (int k = n0; k < basis.size(); ++k) {
    if (a_scaled(k) != Scalar(0)) {
      const Scalar sgn = a_scaled(k) > Scalar(0) ? Scalar(1) : Scalar(-1);
      worst = std::max(worst, std::abs(r(k) + lambda * sgn));
    } else {
      worst = std::max(worst, std::max(Scalar(0), std::abs(r(k)) - lambda));
    }
  }
  return worst;
}

template <typename Scalar>
Scalar kkt_residual(const BatchProblem<Scalar>& p, const StructuredCoef<Scalar>& s) {
  Basis basis(p.dims);
  const BigGram<Scalar> g = build_big_gram(basis, p.gamma0, p.gamma1, 0);
  return kkt_residual_scaled(basis, g.gamma0_big, g.gamma1_big, to_scaled(basis, s), p.lambda);
}

template <typename Scalar = double>
struct SolverReport {
  StructuredCoef<Scalar> solution;
  long iterations = 0;
  Scalar final_objective = 0;
  Scalar kkt_residual = 0;
  bool converged = false;
};

/**
 * Accelerated proximal gradient with backtracking for the structured Lasso.
 *
 * Forward step: the plain dense gradient A G0 - G1 projected onto the
 * structured space. Backward step: entrywise soft threshold of the node graph
 * at eta * lambda (the F-fold repetition of each node variable and the F
 * factor in the penalty cancel in the block decomposition of the prox);
 * diagonal and feature blocks pass through. Momentum restarts whenever the
 * composite objective would increase, so accepted steps decrease it.
 *
 * Stops on kkt_residual <= tol; a stall guard returns the best iterate when
 * the objective stops moving at >= 100x the target residual.
 */
template <typename Scalar>
SolverReport<Scalar> solve_batch(const BatchProblem<Scalar>& p, Scalar tol = Scalar(1e-10),
                                 long max_iter = 200000,
                                 const StructuredCoef<Scalar>* start = nullptr) {
  Basis basis(p.dims);
  const BigGram<Scalar> big = build_big_gram(basis, p.gamma0, p.gamma1, 0);
  const Mat<Scalar>& g0_big = big.gamma0_big;
  const Vec<Scalar>& g1_big = big.gamma1_big;

  StructuredCoef<Scalar> cur =
      start ? *start : StructuredCoef<Scalar>::Zero(p.dims);
  StructuredCoef<Scalar> mom = cur;
  Scalar theta = 1;
  Scalar eta = Scalar(1) / std::max(p.gamma0.trace(), Scalar(1e-12));
  Scalar f_cur = objective(p, cur);

  SolverReport<Scalar> rep;
  rep.solution = cur;
  rep.final_objective = f_cur;

  auto quad_value = [&](const StructuredCoef<Scalar>& s) {
    const Mat<Scalar> A = assemble(s);
    return Scalar(0.5) * (A * p.gamma0).cwiseProduct(A).sum() -
           p.gamma1.cwiseProduct(A).sum();
  };
  auto full_value = [&](const StructuredCoef<Scalar>& s) {
    return quad_value(s) + p.lambda * p.scale_f * s.a_n.cwiseAbs().sum();
  };

  long it = 0;
  Scalar prev_obj = f_cur;
  long stalled = 0;
  for (; it < max_iter; ++it) {
    const Mat<Scalar> Ay = assemble(mom);
    const Mat<Scalar> grad_dense = Ay * p.gamma0 - p.gamma1;
    const StructuredCoef<Scalar> grad = project_graph(basis, grad_dense);
    const Scalar fy = quad_value(mom);

    StructuredCoef<Scalar> next = StructuredCoef<Scalar>::Zero(p.dims);
    while (true) {
      next.diag = mom.diag - eta * grad.diag;
      next.a_f = mom.a_f - eta * grad.a_f;
      const Scalar thr = eta * p.lambda;
      for (int a = 0; a < p.dims.n_nodes; ++a)
        for (int b = a + 1; b < p.dims.n_nodes; ++b) {
          const Scalar v = mom.a_n(a, b) - eta * grad.a_n(a, b);
          const Scalar soft = v > thr ? v - thr : (v < -thr ? v + thr : Scalar(0));
          next.a_n(a, b) = soft;
          next.a_n(b, a) = soft;
        }
      const Scalar fq = quad_value(next);
      Scalar lin = grad.diag.cwiseProduct(next.diag - mom.diag).sum() +
                   grad.a_f.cwiseProduct(next.a_f - mom.a_f).sum() +
                   grad.a_n.cwiseProduct(next.a_n - mom.a_n).sum();
      Scalar dist = (next.diag - mom.diag).squaredNorm() + (next.a_f - mom.a_f).squaredNorm() +
                    (next.a_n - mom.a_n).squaredNorm();
      if (fq <= fy + lin + dist / (2 * eta) + Scalar(1e-14) * std::abs(fy)) break;
      eta *= Scalar(0.5);
      if (eta < Scalar(1e-18)) break;
    }

    const Scalar f_next = full_value(next);
    if (f_next > f_cur + Scalar(1e-14) * std::max<Scalar>(1, std::abs(f_cur))) {
      // Momentum overshoot: restart from the last accepted iterate.
      mom = cur;
      theta = 1;
      continue;
    }

    const Scalar theta_next = (1 + std::sqrt(1 + 4 * theta * theta)) / 2;
    const Scalar beta = (theta - 1) / theta_next;
    mom.diag = next.diag + beta * (next.diag - cur.diag);
    mom.a_f = next.a_f + beta * (next.a_f - cur.a_f);
    mom.a_n = next.a_n + beta * (next.a_n - cur.a_n);
    theta = theta_next;
    cur = next;
    f_cur = f_next;

    if ((it % 16) == 0 || it > max_iter - 2) {
      const Scalar kkt = kkt_residual_scaled(basis, g0_big, g1_big, to_scaled(basis, cur),
                                             p.lambda);
      if (kkt <= tol) {
        rep.converged = true;
        rep.kkt_residual = kkt;
        break;
      }
      if (std::abs(prev_obj - f_cur) <= Scalar(1e-16) * std::max<Scalar>(1, std::abs(f_cur))) {
        if (++stalled >= 50 && kkt <= 100 * tol) {
          rep.kkt_residual = kkt;
          break;
        }
      } else {
        stalled = 0;
      }
      prev_obj = f_cur;
    }
  }

  rep.solution = cur;
  rep.iterations = it;
  rep.final_objective = f_cur;
  if (rep.kkt_residual == Scalar(0))
    rep.kkt_residual =
        kkt_residual_scaled(basis, g0_big, g1_big, to_scaled(basis, cur), p.lambda);
  return rep;
}

}  // namespace prodgraph
