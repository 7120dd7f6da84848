#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "prodgraph/batch_lasso.hpp"
#include "prodgraph/big_gram.hpp"
#include "prodgraph/covariance.hpp"
#include "prodgraph/structured.hpp"

namespace prodgraph {

/// Raised when a path call exceeds its event budget or loses the invertibility
/// of the active Gram block; callers fall back to a fresh start.
struct PathAbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HomotopyOptions {
  double tie_tol = 1e-12;         ///< breakpoint tie / re-fire exclusion window
  double drift_tol = 1e-6;        ///< g01_inv re-factorization trigger
  double degenerate_jump = 1e-10; ///< nudge past a cycling event
  long max_events_factor = 10;    ///< event budget per path call, times |K_N|
};

/**
 * Active-set bookkeeping of the structured-Lasso homotopy.
 *
 * The working index set K^1 is the fixed unpenalized block (all diagonal and
 * feature variables, in enumeration order) followed by the active node edges
 * in insertion order. `g01_inv` is the maintained inverse of the Gram matrix
 * restricted to K^1; `a_s1` the scaled solution on K^1 at `lambda`, which is
 * always expressed in the normalization of the Gram system it was solved
 * against.
 */
template <typename Scalar = double>
struct ActiveSetState {
  std::vector<int> active_nodes;  ///< K_N^1 as basis indices, insertion order
  std::vector<int> sign_n1;       ///< +1 / -1 per active node
  Mat<Scalar> g01_inv;
  Vec<Scalar> a_s1;
  Scalar lambda = 0;

  // diagnostics
  long total_events = 0;
  long refactor_count = 0;
  long degenerate_jumps = 0;
  bool lambda_at_breakpoint = false;

  int active_count() const { return static_cast<int>(active_nodes.size()); }
};

namespace homotopy_detail {

template <typename Scalar>
std::vector<int> k1_indices(const Basis& basis, const ActiveSetState<Scalar>& st) {
  std::vector<int> k1(basis.unpenalized_count());
  for (int k = 0; k < basis.unpenalized_count(); ++k) k1[k] = k;
  k1.insert(k1.end(), st.active_nodes.begin(), st.active_nodes.end());
  return k1;
}

template <typename Scalar>
std::vector<int> kn0_indices(const Basis& basis, const ActiveSetState<Scalar>& st) {
  std::vector<char> active(basis.size(), 0);
  for (int k : st.active_nodes) active[k] = 1;
  std::vector<int> kn0;
  kn0.reserve(basis.node_count() - st.active_nodes.size());
  for (int k = basis.node_offset(); k < basis.size(); ++k)
    if (!active[k]) kn0.push_back(k);
  return kn0;
}

template <typename Scalar>
Vec<Scalar> gather(const Vec<Scalar>& v, const std::vector<int>& idx) {
  Vec<Scalar> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

template <typename Scalar>
Mat<Scalar> gather(const Mat<Scalar>& m, const std::vector<int>& rows,
                   const std::vector<int>& cols) {
  Mat<Scalar> out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

template <typename Scalar>
Vec<Scalar> sign_vector(const Basis& basis, const ActiveSetState<Scalar>& st) {
  Vec<Scalar> w = Vec<Scalar>::Zero(basis.unpenalized_count() + st.active_nodes.size());
  for (size_t i = 0; i < st.active_nodes.size(); ++i)
    w(basis.unpenalized_count() + i) = Scalar(st.sign_n1[i]);
  return w;
}

template <typename Scalar>
void refactor_g01(ActiveSetState<Scalar>& st, const Basis& basis, const BigGram<Scalar>& gram) {
  const auto k1 = k1_indices(basis, st);
  const Mat<Scalar> g01 = gather(gram.gamma0_big, k1, k1);
  Eigen::LDLT<Mat<Scalar>> ldlt(g01);
  const Mat<Scalar> inv = ldlt.solve(Mat<Scalar>::Identity(k1.size(), k1.size()));
  if (ldlt.info() != Eigen::Success ||
      (g01 * inv - Mat<Scalar>::Identity(k1.size(), k1.size())).cwiseAbs().maxCoeff() >
          Scalar(1e-3))
    throw PathAbortError("homotopy: active Gram block is numerically singular");
  st.g01_inv = inv;
  st.refactor_count += 1;
}

template <typename Scalar>
Scalar g01_drift(const ActiveSetState<Scalar>& st, const Basis& basis,
                 const BigGram<Scalar>& gram) {
  const auto k1 = k1_indices(basis, st);
  const Mat<Scalar> g01 = gather(gram.gamma0_big, k1, k1);
  return (g01 * st.g01_inv - Mat<Scalar>::Identity(k1.size(), k1.size()))
      .cwiseAbs()
      .maxCoeff();
}

/// Bordered-inverse update for appending node `k` to the active set.
template <typename Scalar>
void apply_add(ActiveSetState<Scalar>& st, const Basis& basis, const BigGram<Scalar>& gram,
               int k, int sign) {
  const auto k1 = k1_indices(basis, st);
  const Eigen::Index m = st.g01_inv.rows();
  Vec<Scalar> b(m);
  for (Eigen::Index i = 0; i < m; ++i) b(i) = gram.gamma0_big(k1[i], k);
  const Scalar c = gram.gamma0_big(k, k);
  const Vec<Scalar> u = st.g01_inv * b;
  const Scalar schur = c - b.dot(u);
  st.active_nodes.push_back(k);
  st.sign_n1.push_back(sign);
  if (schur <= Scalar(0) || !std::isfinite(static_cast<double>(schur))) {
    refactor_g01(st, basis, gram);
    return;
  }
  Mat<Scalar> inv(m + 1, m + 1);
  inv.topLeftCorner(m, m) = st.g01_inv + (u * u.transpose()) / schur;
  inv.block(0, m, m, 1) = -u / schur;
  inv.block(m, 0, 1, m) = (-u / schur).transpose();
  inv(m, m) = Scalar(1) / schur;
  st.g01_inv = std::move(inv);
}

/// Column/row deletion of the active-list position `pos` via the block
/// inverse identity.
template <typename Scalar>
void apply_remove(ActiveSetState<Scalar>& st, const Basis& basis, const BigGram<Scalar>& gram,
                  int pos) {
  const Eigen::Index i = basis.unpenalized_count() + pos;
  const Eigen::Index m = st.g01_inv.rows();
  const Scalar mii = st.g01_inv(i, i);
  st.active_nodes.erase(st.active_nodes.begin() + pos);
  st.sign_n1.erase(st.sign_n1.begin() + pos);
  if (std::abs(static_cast<double>(mii)) < 1e-300) {
    refactor_g01(st, basis, gram);
    return;
  }
  Mat<Scalar> inv(m - 1, m - 1);
  Vec<Scalar> col(m - 1);
  Eigen::Index r = 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    if (a == i) continue;
    col(r) = st.g01_inv(a, i);
    Eigen::Index s = 0;
    for (Eigen::Index b = 0; b < m; ++b) {
      if (b == i) continue;
      inv(r, s) = st.g01_inv(a, b);
      ++s;
    }
    ++r;
  }
  inv.noalias() -= col * (col.transpose() / mii);
  st.g01_inv = std::move(inv);
}

enum class EventKind { RemoveActive, AddPositive, AddNegative };

struct Event {
  double value = 0;  ///< breakpoint location (lambda or mu)
  EventKind kind = EventKind::RemoveActive;
  int node_k = -1;   ///< basis index of the node variable
  int pos = -1;      ///< active-list position (RemoveActive only)
};

/// Picks the crossing event: the nearest candidate strictly inside the open
/// window in the walk direction, breaking near-ties by smallest basis index.
inline const Event* select_event(const std::vector<Event>& cands, bool increasing,
                                 double current, double limit, double tie_tol) {
  const Event* best = nullptr;
  for (const auto& e : cands) {
    if (!std::isfinite(e.value)) continue;
    if (increasing) {
      if (e.value <= current + tie_tol || e.value >= limit) continue;
      if (!best || e.value < best->value - tie_tol ||
          (std::abs(e.value - best->value) <= tie_tol && e.node_k < best->node_k))
        best = &e;
    } else {
      if (e.value >= current - tie_tol || e.value <= limit) continue;
      if (!best || e.value > best->value + tie_tol ||
          (std::abs(e.value - best->value) <= tie_tol && e.node_k < best->node_k))
        best = &e;
    }
  }
  return best;
}

/// Cycling detector per path call; spec'd nudge past a re-firing event.
struct CycleGuard {
  int last_k = -1;
  int last_kind = -1;
  double last_value = std::numeric_limits<double>::quiet_NaN();
  int repeats = 0;

  bool fires(const Event& e, double tol) {
    if (e.node_k == last_k && static_cast<int>(e.kind) == last_kind &&
        std::abs(e.value - last_value) <= tol) {
      ++repeats;
    } else {
      last_k = e.node_k;
      last_kind = static_cast<int>(e.kind);
      last_value = e.value;
      repeats = 1;
    }
    return repeats > 2;
  }
};

}  // namespace homotopy_detail

/// Scaled solution scattered back to all |K| coordinates (zeros off K^1).
template <typename Scalar>
Vec<Scalar> full_scaled(const ActiveSetState<Scalar>& st, const Basis& basis) {
  Vec<Scalar> a = Vec<Scalar>::Zero(basis.size());
  const auto k1 = homotopy_detail::k1_indices(basis, st);
  for (size_t i = 0; i < k1.size(); ++i) a(k1[i]) = st.a_s1(i);
  return a;
}

template <typename Scalar>
StructuredCoef<Scalar> current_coef(const ActiveSetState<Scalar>& st, const Basis& basis) {
  return from_scaled(basis, full_scaled(st, basis));
}

/// KKT residual of the state's solution against its own Gram system.
template <typename Scalar>
Scalar state_kkt(const ActiveSetState<Scalar>& st, const Basis& basis,
                 const BigGram<Scalar>& gram) {
  return kkt_residual_scaled(basis, gram.gamma0_big, gram.gamma1_big, full_scaled(st, basis),
                             st.lambda);
}

/**
 * Regularization path: walks lambda monotonically from `st.lambda` to
 * `lambda_target`, tracking the piecewise-linear solution
 *   a^s_1(lambda) = [Gamma_0^1]^{-1} (gamma_1^1 - lambda w_1).
 * Breakpoints are zero crossings of active coordinates (d_i / g_i) and the
 * inactive subgradients reaching +-1; each crossing applies a single
 * add/remove with a rank-1 inverse update.
 */
template <typename Scalar>
void reg_path(ActiveSetState<Scalar>& st, const Basis& basis, const BigGram<Scalar>& gram,
              Scalar lambda_target, const HomotopyOptions& opt = {}) {
  using namespace homotopy_detail;
  if (lambda_target < Scalar(0)) throw std::invalid_argument("reg_path: negative target");
  const int nDF = basis.unpenalized_count();
  const long max_events = opt.max_events_factor * std::max(1, basis.node_count());
  const bool increasing = lambda_target > st.lambda;
  Scalar lam = st.lambda;
  long events = 0;
  CycleGuard guard;

  while (true) {
    const auto k1 = k1_indices(basis, st);
    const auto kn0 = kn0_indices(basis, st);
    const Vec<Scalar> g1_1 = gather(gram.gamma1_big, k1);
    const Vec<Scalar> w1 = sign_vector(basis, st);
    const Vec<Scalar> d = st.g01_inv * g1_1;
    const Vec<Scalar> g = st.g01_inv * w1;

    std::vector<Event> cands;
    cands.reserve(st.active_nodes.size() + 2 * kn0.size());
    for (size_t i = 0; i < st.active_nodes.size(); ++i) {
      const Scalar den = g(nDF + i);
      if (den != Scalar(0))
        cands.push_back({static_cast<double>(d(nDF + i) / den), EventKind::RemoveActive,
                         st.active_nodes[i], static_cast<int>(i)});
    }
    if (!kn0.empty()) {
      const Mat<Scalar> g00 = gather(gram.gamma0_big, kn0, k1);
      const Vec<Scalar> v1 = gather(gram.gamma1_big, kn0) - g00 * d;
      const Vec<Scalar> v2 = g00 * g;
      for (size_t j = 0; j < kn0.size(); ++j) {
        const Scalar dp = Scalar(1) - v2(j);
        const Scalar dm = Scalar(-1) - v2(j);
        if (dp != Scalar(0))
          cands.push_back({static_cast<double>(v1(j) / dp), EventKind::AddPositive, kn0[j], -1});
        if (dm != Scalar(0))
          cands.push_back({static_cast<double>(v1(j) / dm), EventKind::AddNegative, kn0[j], -1});
      }
    }

    const double tie = opt.tie_tol * std::max(1.0, std::abs(static_cast<double>(lam)));
    const Event* ev = select_event(cands, increasing, static_cast<double>(lam),
                                   static_cast<double>(lambda_target), tie);
    if (!ev) {
      st.a_s1 = d - lambda_target * g;
      st.lambda = lambda_target;
      break;
    }
    if (guard.fires(*ev, tie)) {
      // Degenerate re-firing event; jump just past it and re-solve the segment.
      const double jump = opt.degenerate_jump * std::max(1.0, std::abs(ev->value));
      lam = Scalar(increasing ? ev->value + jump : ev->value - jump);
      st.degenerate_jumps += 1;
      continue;
    }
    lam = Scalar(ev->value);
    switch (ev->kind) {
      case EventKind::RemoveActive: apply_remove(st, basis, gram, ev->pos); break;
      case EventKind::AddPositive: apply_add(st, basis, gram, ev->node_k, +1); break;
      case EventKind::AddNegative: apply_add(st, basis, gram, ev->node_k, -1); break;
    }
    st.total_events += 1;
    if (++events > max_events) throw PathAbortError("reg_path: event budget exceeded");
  }

  if (g01_drift(st, basis, gram) > Scalar(opt.drift_tol)) {
    refactor_g01(st, basis, gram);
    const auto k1 = k1_indices(basis, st);
    st.a_s1 = st.g01_inv * (gather(gram.gamma1_big, k1) - st.lambda * sign_vector(basis, st));
  }
}

/**
 * Data path: grows the new sample's NF response coordinates into the
 * objective one at a time through continuation weights mu in [0, 1].
 *
 * Within a segment the solution is the rational function
 *   a^s_1(mu) = abar + phi(mu) * e * u,
 * with abar the mu = 0 system solution, u = [Gamma_0^1]^{-1} v, e the new
 * response residual at abar, and phi the Sherman-Morrison factor of the
 * rank-1 weight: phi = mu / (t + mu a0) for the stationary weight mu/t, and
 * phi = mu p / (t p + mu (t + p a0)) for the phase-weighted augmented rank-1
 * term mu p / (t (p + mu)). Breakpoints are solved in phi and mapped back.
 *
 * `st.lambda` must hold (1 + 1/t) times the target penalty on entry (the
 * caller runs `reg_path` for the constant change first); on exit the Gram
 * system is rescaled to t+1 samples and `st.lambda` is the target penalty.
 * `phase_count` is the arriving sample's phase count p (negative when
 * stationary); tiles and responses must already be centered in augmented mode.
 */
template <typename Scalar>
void data_path(ActiveSetState<Scalar>& st, const Basis& basis, BigGram<Scalar>& gram,
               const ResponseTile<Scalar>& tile, Scalar phase_count,
               const HomotopyOptions& opt = {}) {
  using namespace homotopy_detail;
  const long t = gram.t;
  if (t < 1) throw std::invalid_argument("data_path: gram must hold at least one sample");
  const Scalar lamp = st.lambda;  // (1 + 1/t) * lambda_target
  const int nDF = basis.unpenalized_count();
  const int nf = basis.dims().state_size();
  const long max_events = opt.max_events_factor * std::max(1, basis.node_count());
  const bool augmented = phase_count >= Scalar(0);
  const Scalar p = phase_count;
  long events = 0;

  const bool skip_data = augmented && p == Scalar(0);
  if (!skip_data) {
    const Scalar fold_w = augmented ? p / (Scalar(t) * (p + 1)) : Scalar(1) / Scalar(t);
    auto phi_to_mu = [&](Scalar phi, Scalar a0) -> double {
      if (!std::isfinite(static_cast<double>(phi))) return std::numeric_limits<double>::infinity();
      if (augmented) {
        const Scalar den = p - phi * (Scalar(t) + p * a0);
        if (den == Scalar(0)) return std::numeric_limits<double>::infinity();
        return static_cast<double>(phi * Scalar(t) * p / den);
      }
      const Scalar den = Scalar(1) - phi * a0;
      if (den == Scalar(0)) return std::numeric_limits<double>::infinity();
      return static_cast<double>(phi * Scalar(t) / den);
    };

    for (int i = 0; i < nf; ++i) {
      double mu = 0.0;
      CycleGuard guard;
      while (true) {
        const auto k1 = k1_indices(basis, st);
        const auto kn0 = kn0_indices(basis, st);
        const Vec<Scalar> g1_1 = gather(gram.gamma1_big, k1);
        const Vec<Scalar> w1 = sign_vector(basis, st);
        const Vec<Scalar> abar = st.g01_inv * (g1_1 - lamp * w1);
        Vec<Scalar> v1(k1.size());
        for (size_t a = 0; a < k1.size(); ++a) v1(a) = tile.x_tile(k1[a], i);
        const Vec<Scalar> u = st.g01_inv * v1;
        const Scalar a0 = v1.dot(u);
        const Scalar e = tile.x_next(i) - v1.dot(abar);

        std::vector<Event> cands;
        cands.reserve(st.active_nodes.size() + 2 * kn0.size());
        for (size_t j = 0; j < st.active_nodes.size(); ++j) {
          const Scalar den = e * u(nDF + j);
          if (den != Scalar(0))
            cands.push_back({phi_to_mu(-abar(nDF + j) / den, a0), EventKind::RemoveActive,
                             st.active_nodes[j], static_cast<int>(j)});
        }
        if (!kn0.empty()) {
          const Mat<Scalar> g00 = gather(gram.gamma0_big, kn0, k1);
          const Vec<Scalar> base = g00 * abar - gather(gram.gamma1_big, kn0);
          Vec<Scalar> v0(kn0.size());
          for (size_t j = 0; j < kn0.size(); ++j) v0(j) = tile.x_tile(kn0[j], i);
          const Vec<Scalar> q = e * (v0 - g00 * u);
          for (size_t j = 0; j < kn0.size(); ++j) {
            if (q(j) == Scalar(0)) continue;
            cands.push_back(
                {phi_to_mu((base(j) + lamp) / q(j), a0), EventKind::AddPositive, kn0[j], -1});
            cands.push_back(
                {phi_to_mu((base(j) - lamp) / q(j), a0), EventKind::AddNegative, kn0[j], -1});
          }
        }

        const Event* ev = select_event(cands, /*increasing=*/true, mu, 1.0, opt.tie_tol);
        if (!ev) break;
        if (guard.fires(*ev, opt.tie_tol)) {
          mu = std::min(1.0, ev->value + opt.degenerate_jump);
          st.degenerate_jumps += 1;
          continue;
        }
        mu = ev->value;
        switch (ev->kind) {
          case EventKind::RemoveActive: apply_remove(st, basis, gram, ev->pos); break;
          case EventKind::AddPositive: apply_add(st, basis, gram, ev->node_k, +1); break;
          case EventKind::AddNegative: apply_add(st, basis, gram, ev->node_k, -1); break;
        }
        st.total_events += 1;
        if (++events > max_events) throw PathAbortError("data_path: event budget exceeded");
      }

      // mu_i = 1: fold response coordinate i permanently into the system.
      const auto k1 = k1_indices(basis, st);
      Vec<Scalar> v1(k1.size());
      for (size_t a = 0; a < k1.size(); ++a) v1(a) = tile.x_tile(k1[a], i);
      const Vec<Scalar> u = st.g01_inv * v1;
      const Scalar denom = Scalar(1) / fold_w + v1.dot(u);
      st.g01_inv.noalias() -= u * (u.transpose() / denom);
      gram.gamma0_big.noalias() += fold_w * tile.x_tile.col(i) * tile.x_tile.col(i).transpose();
      gram.gamma1_big.noalias() += (fold_w * tile.x_next(i)) * tile.x_tile.col(i);
    }
  }

  const Scalar rescale = Scalar(t) / Scalar(t + 1);
  gram.gamma0_big *= rescale;
  gram.gamma1_big *= rescale;
  gram.t = t + 1;
  st.g01_inv /= rescale;
  st.lambda = lamp * rescale;

  if (g01_drift(st, basis, gram) > Scalar(opt.drift_tol)) refactor_g01(st, basis, gram);
  const auto k1 = k1_indices(basis, st);
  st.a_s1 = st.g01_inv * (gather(gram.gamma1_big, k1) - st.lambda * sign_vector(basis, st));
}

/// Exact warm start: the empty-support state is valid at any lambda above the
/// largest inactive correlation, and descending the regularization path from
/// there reproduces the batch solution at lambda0.
template <typename Scalar>
ActiveSetState<Scalar> warm_start(const Basis& basis, const BigGram<Scalar>& gram,
                                  Scalar lambda0, const HomotopyOptions& opt = {}) {
  using namespace homotopy_detail;
  ActiveSetState<Scalar> st;
  refactor_g01(st, basis, gram);
  st.refactor_count = 0;
  const auto k1 = k1_indices(basis, st);
  const Vec<Scalar> g1_1 = gather(gram.gamma1_big, k1);
  st.a_s1 = st.g01_inv * g1_1;

  const auto kn0 = kn0_indices(basis, st);
  Scalar lambda_max = 0;
  if (!kn0.empty()) {
    const Mat<Scalar> g00 = gather(gram.gamma0_big, kn0, k1);
    lambda_max = (gather(gram.gamma1_big, kn0) - g00 * st.a_s1).cwiseAbs().maxCoeff();
  }
  st.lambda = std::max(lambda0, lambda_max * Scalar(1 + 1e-9) + Scalar(1e-300));
  if (lambda0 < st.lambda) reg_path(st, basis, gram, lambda0, opt);
  return st;
}

/**
 * One-step-prediction derivative step for the penalty:
 *   lambda_next = max(lambda - eta * d, 0),
 *   d = -(a^G_1)^T [Gamma_0^1]^{-1} w_1,
 * with a^G_1 the inner products of the prediction-error gradient
 * G = (A x_cur - x_next) x_cur^T over K^1, computed by index arithmetic. In
 * augmented mode the caller passes phase-centered vectors, which realizes the
 * intercept-corrected gradient.
 */
template <typename Scalar>
Scalar lambda_step(ActiveSetState<Scalar>& st, const Basis& basis, const BigGram<Scalar>& gram,
                   const Vec<Scalar>& x_next, const Vec<Scalar>& x_cur, Scalar eta,
                   const HomotopyOptions& opt = {}) {
  using namespace homotopy_detail;
  const GraphDims& d = basis.dims();
  const StructuredCoef<Scalar> coef = current_coef(st, basis);
  const Vec<Scalar> resid =
      vec(apply_structured(coef, ivec(x_cur, d.n_nodes, d.n_features))) - x_next;

  const auto k1 = k1_indices(basis, st);
  Vec<Scalar> a_g(k1.size());
  for (size_t i = 0; i < k1.size(); ++i) {
    const int k = k1[i];
    Scalar s = 0;
    for (const auto& [r, c] : basis.pattern(k)) s += resid(r) * x_cur(c);
    a_g(i) = Scalar(basis.weight(k)) * s;
  }
  const Vec<Scalar> w1 = sign_vector(basis, st);
  const Scalar deriv = -a_g.dot(st.g01_inv * w1);

  // Flag (but do not alter) a lambda sitting on a breakpoint; the derivative
  // above is then the current segment's one-sided value.
  st.lambda_at_breakpoint = false;
  {
    const Vec<Scalar> g1_1 = gather(gram.gamma1_big, k1);
    const Vec<Scalar> dd = st.g01_inv * g1_1;
    const Vec<Scalar> gg = st.g01_inv * w1;
    const double tie = opt.tie_tol * std::max(1.0, std::abs(static_cast<double>(st.lambda)));
    const double lam = static_cast<double>(st.lambda);
    const int nDF = basis.unpenalized_count();
    for (size_t i = 0; i < st.active_nodes.size() && !st.lambda_at_breakpoint; ++i) {
      const Scalar den = gg(nDF + i);
      if (den != Scalar(0) &&
          std::abs(static_cast<double>(dd(nDF + i) / den) - lam) <= tie)
        st.lambda_at_breakpoint = true;
    }
    const auto kn0 = kn0_indices(basis, st);
    if (!kn0.empty() && !st.lambda_at_breakpoint) {
      const Mat<Scalar> g00 = gather(gram.gamma0_big, kn0, k1);
      const Vec<Scalar> v1 = gather(gram.gamma1_big, kn0) - g00 * dd;
      const Vec<Scalar> v2 = g00 * gg;
      for (size_t j = 0; j < kn0.size() && !st.lambda_at_breakpoint; ++j) {
        const Scalar dp = Scalar(1) - v2(j), dm = Scalar(-1) - v2(j);
        if ((dp != Scalar(0) && std::abs(static_cast<double>(v1(j) / dp) - lam) <= tie) ||
            (dm != Scalar(0) && std::abs(static_cast<double>(v1(j) / dm) - lam) <= tie))
          st.lambda_at_breakpoint = true;
      }
    }
  }

  return std::max(st.lambda - eta * deriv, Scalar(0));
}

template <typename Scalar = double>
struct OnlineStepResult {
  Scalar lambda = 0;
  Scalar kkt = 0;
  int active_count = 0;
  bool path_fallback = false;
};

/**
 * One arrival of the online pipeline: penalty step, regularization path to
 * (1 + 1/t) * lambda_next, data path to t+1 samples, then the covariance /
 * phase-mean bookkeeping. In augmented mode the tile and responses are
 * centered by the tracker's phase means before the data path, and the means
 * are updated afterwards, in that order.
 *
 * A path abort falls back to rebuilding the Gram system from the tracker and
 * warm-starting at the stepped penalty.
 */
template <typename Scalar>
OnlineStepResult<Scalar> online_step(ActiveSetState<Scalar>& st, BigGram<Scalar>& gram,
                                     CovState<Scalar>& cov, const Basis& basis,
                                     const Vec<Scalar>& x_next, Scalar eta,
                                     const HomotopyOptions& opt = {}) {
  if (!cov.has_initial()) throw std::logic_error("online_step: tracker has no initial sample");
  if (gram.t != cov.t()) throw std::logic_error("online_step: gram and tracker out of sync");
  const Vec<Scalar> x_cur = cov.last_x();
  const long t = gram.t;
  const bool augmented = cov.mode() == CovMode::Augmented;

  Vec<Scalar> xc = x_cur, xn = x_next;
  Scalar p = Scalar(-1);
  if (augmented) {
    const int M = cov.dims().period;
    const int m_bar = phase_mod(t + 1, M);
    const int j_prev = phase_mod(m_bar - 1, M);
    xc -= cov.pred_mean(j_prev);
    xn -= cov.pred_mean(m_bar);
    p = Scalar(cov.phase_count(m_bar));
  }

  const Scalar lambda_next = lambda_step(st, basis, gram, xn, xc, eta, opt);

  OnlineStepResult<Scalar> res;
  try {
    reg_path(st, basis, gram, (Scalar(1) + Scalar(1) / Scalar(t)) * lambda_next, opt);
    ResponseTile<Scalar> tile{response_tile(basis, xc), xn};
    data_path(st, basis, gram, tile, p, opt);
  } catch (const PathAbortError&) {
    res.path_fallback = true;
  }

  cov.update(x_next, x_cur);
  if (res.path_fallback) {
    gram = build_big_gram(basis, cov);
    st = warm_start(basis, gram, lambda_next, opt);
  }

  res.lambda = st.lambda;
  res.kkt = state_kkt(st, basis, gram);
  res.active_count = st.active_count();
  return res;
}

}  // namespace prodgraph
