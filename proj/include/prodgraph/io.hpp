#pragma once

#include <json.hpp>

#include "prodgraph/covariance.hpp"
#include "prodgraph/sim.hpp"
#include "prodgraph/structured.hpp"
#include "prodgraph/wald.hpp"

namespace prodgraph {

using json = nlohmann::json;

/// Wire form: {N, F, diag: row-major N*F, a_f: svec, a_n: svec}.
template <typename Scalar>
json coef_to_json(const StructuredCoef<Scalar>& s) {
  json j;
  j["N"] = s.n_nodes();
  j["F"] = s.n_features();
  std::vector<Scalar> diag;
  diag.reserve(s.diag.size());
  for (int n = 0; n < s.n_nodes(); ++n)
    for (int f = 0; f < s.n_features(); ++f) diag.push_back(s.diag(n, f));
  j["diag"] = diag;
  const auto vf = svec(s.a_f);
  const auto vn = svec(s.a_n);
  j["a_f"] = std::vector<Scalar>(vf.data(), vf.data() + vf.size());
  j["a_n"] = std::vector<Scalar>(vn.data(), vn.data() + vn.size());
  return j;
}

template <typename Scalar = double>
StructuredCoef<Scalar> coef_from_json(const json& j) {
  const int n = j.at("N").get<int>();
  const int f = j.at("F").get<int>();
  GraphDims d(n, f);
  StructuredCoef<Scalar> s = StructuredCoef<Scalar>::Zero(d);
  const auto diag = j.at("diag").get<std::vector<Scalar>>();
  if (static_cast<int>(diag.size()) != n * f)
    throw std::invalid_argument("coef_from_json: diag length mismatch");
  int i = 0;
  for (int nn = 0; nn < n; ++nn)
    for (int ff = 0; ff < f; ++ff) s.diag(nn, ff) = diag[i++];
  const auto vf = j.at("a_f").get<std::vector<Scalar>>();
  const auto vn = j.at("a_n").get<std::vector<Scalar>>();
  s.a_f = isvec(Eigen::Map<const Vec<Scalar>>(vf.data(), vf.size()), f);
  s.a_n = isvec(Eigen::Map<const Vec<Scalar>>(vn.data(), vn.size()), n);
  return s;
}

template <typename Scalar>
json model_to_json(const TrueModel<Scalar>& m) {
  json j;
  j["coef"] = coef_to_json(m.coef);
  j["M"] = m.dims.period;
  j["spectral_norm"] = m.spectral_norm;
  std::vector<std::vector<Scalar>> trend(m.dims.period);
  for (int p = 0; p < m.dims.period; ++p)
    trend[p] = std::vector<Scalar>(m.trend.row(p).begin(), m.trend.row(p).end());
  j["trend"] = trend;
  return j;
}

template <typename Scalar>
json wald_estimate_to_json(const WaldEstimate<Scalar>& w, double significance) {
  json j = coef_to_json(w.sparsified);
  j["p0"] = w.p0;
  j["significance"] = significance;
  return j;
}

/// Debug snapshot of a covariance tracker.
template <typename Scalar>
json cov_to_json(const CovState<Scalar>& cov) {
  json j;
  j["t"] = cov.t();
  j["mode"] = cov.mode() == CovMode::Augmented ? "augmented" : "stationary";
  const int nf = cov.dims().state_size();
  std::vector<Scalar> g0(cov.gamma0().data(), cov.gamma0().data() + nf * nf);
  std::vector<Scalar> g1(cov.gamma1().data(), cov.gamma1().data() + nf * nf);
  j["gamma0"] = g0;
  j["gamma1"] = g1;
  if (cov.mode() == CovMode::Augmented) {
    std::vector<long> counts;
    std::vector<std::vector<Scalar>> means;
    for (int m = 0; m < cov.dims().period; ++m) {
      counts.push_back(cov.phase_count(m));
      means.emplace_back(cov.pred_mean(m).data(), cov.pred_mean(m).data() + nf);
    }
    j["phase_counts"] = counts;
    j["pred_means"] = means;
  }
  return j;
}

}  // namespace prodgraph
