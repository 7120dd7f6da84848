#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prodgraph/big_gram.hpp"
#include "prodgraph/covariance.hpp"
#include "prodgraph/csv.hpp"
#include "prodgraph/homotopy.hpp"
#include "prodgraph/io.hpp"
#include "prodgraph/metrics.hpp"
#include "prodgraph/sim.hpp"
#include "prodgraph/wald.hpp"

namespace prodgraph {

enum class EstimatorMode { LowDim, HighDim, Both };
enum class InputKind { Synthetic, Csv };

struct RunConfig {
  GraphDims dims{10, 4, 12};
  EstimatorMode mode = EstimatorMode::Both;
  long t0 = 20;             ///< warm-start sample count
  double lambda0 = 0.03;    ///< initial penalty
  double eta = 5e-6;        ///< penalty step size
  double significance = 0.1;
  long t_total = 600;
  int replications = 1;
  std::uint64_t seed = 1;
  double edge_density = 0.15;
  double target_norm = 0.5;
  double value_scale = 1.0;
  double noise_scale = 0.5;
  double trend_scale = 2.0;
  InputKind input = InputKind::Synthetic;
  std::string csv_path;
  bool use_f_statistic = false;
  int threads = 1;
  std::string out_dir;  ///< empty: no files written

  void validate() const {
    if (t0 < 1) throw std::invalid_argument("RunConfig: t0 must be >= 1");
    if (eta < 0) throw std::invalid_argument("RunConfig: eta must be >= 0");
    if (t_total <= t0) throw std::invalid_argument("RunConfig: t_total must exceed t0");
    if (replications < 1) throw std::invalid_argument("RunConfig: replications must be >= 1");
  }
};

struct StepRecord {
  long t = 0;
  std::string estimator;  ///< "lasso" or "wald"
  double pred_err = 0;    ///< running average one-step prediction error
  double wall_ms = 0;
  std::optional<double> rmsd;
  std::optional<double> lambda;
  std::optional<int> active_count;
  std::optional<double> kkt;
};

struct RunMetrics {
  int replication = 0;
  std::vector<StepRecord> steps;  ///< append-only, monotone in t per estimator
  bool lasso_ran = false, wald_ran = false;
  StructuredCoef<double> lasso_final;
  StructuredCoef<double> wald_final;
  Mat<double> trend_est;  ///< M x NF when augmented and all phases seen, else 0 x 0
  long lasso_fallbacks = 0;
  double lasso_kkt_worst = 0;
};

inline json step_to_json(const StepRecord& r) {
  json j{{"t", r.t}, {"estimator", r.estimator}, {"pred_err", r.pred_err},
         {"wall_ms", r.wall_ms}};
  if (r.rmsd) j["rmsd"] = *r.rmsd;
  if (r.lambda) j["lambda"] = *r.lambda;
  if (r.active_count) j["active_count"] = *r.active_count;
  if (r.kkt) j["kkt_residual"] = *r.kkt;
  return j;
}

namespace harness_detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace harness_detail

/// One replication of the evaluation protocol: warm start at t0, then one
/// online update per arrival for the selected estimators, metrics recorded
/// per step. Deterministic given (cfg.seed, rep).
inline RunMetrics run_replication(const RunConfig& cfg, int rep) {
  cfg.validate();
  using clock = std::chrono::steady_clock;

  GraphDims dims = cfg.dims;
  Mat<double> stream;
  std::optional<TrueModel<double>> truth;
  if (cfg.input == InputKind::Synthetic) {
    const std::uint64_t model_seed = cfg.seed + 7919u * static_cast<std::uint64_t>(rep);
    truth = random_true_model<double>(dims, cfg.edge_density, cfg.value_scale,
                                      cfg.target_norm, model_seed, cfg.noise_scale,
                                      cfg.trend_scale);
    const long burn = StreamSimulator<double>::default_burn_in(truth->spectral_norm);
    stream = simulate(*truth, cfg.t_total, burn, model_seed ^ 0x9e3779b97f4a7c15ull);
  } else {
    auto ing = ingest_csv<double>(cfg.csv_path);
    dims = GraphDims(ing.dims.n_nodes, ing.dims.n_features, cfg.dims.period);
    stream = std::move(ing.stream);
    if (stream.cols() <= cfg.t0 + 1)
      throw SchemaError("run: ingested stream shorter than t0 + 2 time points");
  }
  const long t_total = std::min<long>(cfg.t_total, stream.cols() - 1);

  const bool want_lasso = cfg.mode != EstimatorMode::LowDim;
  const bool want_wald = cfg.mode != EstimatorMode::HighDim;
  const CovMode cov_mode = dims.period > 1 ? CovMode::Augmented : CovMode::Stationary;

  Basis basis(dims);
  CovState<double> cov(dims, cov_mode);
  cov.observe_initial(stream.col(0));
  for (long tau = 1; tau <= cfg.t0; ++tau) cov.update(stream.col(tau), stream.col(tau - 1));

  RunMetrics metrics;
  metrics.replication = rep;

  // High-dimensional warm start per the evaluation protocol: a batch solve at
  // (t0, lambda0) provides the starting solution; the path state is seeded by
  // the exact regularization-path descent, which reproduces it.
  BigGram<double> gram;
  ActiveSetState<double> state;
  HomotopyOptions hopt;
  if (want_lasso) {
    gram = build_big_gram(basis, cov);
    BatchProblem<double> p0 = BatchProblem<double>::from_cov(cov, cfg.lambda0);
    solve_batch(p0, 1e-9, 50000);
    state = warm_start(basis, gram, cfg.lambda0, hopt);
    metrics.lasso_ran = true;
  }

  PredErrAccum<double> lasso_err, wald_err;
  std::optional<WaldEstimate<double>> wald_last;
  WaldOptions wopt;
  wopt.use_f_statistic = cfg.use_f_statistic;
  const int M = dims.period;
  const bool augmented = cov_mode == CovMode::Augmented;

  for (long tau = cfg.t0 + 1; tau <= t_total; ++tau) {
    const Vec<double> x_next = stream.col(tau);
    const Vec<double> x_cur = cov.last_x();
    const long t = cov.t();
    const int m_bar = phase_mod(t + 1, M);
    const int j_prev = phase_mod(m_bar - 1, M);

    // Prediction-error contributions use the estimates available before the
    // arrival is folded in.
    if (want_lasso) {
      const StructuredCoef<double> est = current_coef(state, basis);
      if (augmented) {
        Vec<double> b = cov.pred_mean(m_bar) -
                        vec(apply_structured(est, ivec(cov.pred_mean(j_prev), dims.n_nodes,
                                                       dims.n_features)));
        lasso_err.add(x_next, x_cur, est, &b);
      } else {
        lasso_err.add(x_next, x_cur, est, nullptr);
      }
    }
    if (want_wald && wald_last) {
      const StructuredCoef<double>& est = wald_last->sparsified;
      if (augmented) {
        const Mat<double> a_ols = cov.gamma1() * cov.gamma0_inv();
        Vec<double> b = cov.pred_mean(m_bar) - a_ols * cov.pred_mean(j_prev);
        wald_err.add(x_next, x_cur, est, &b);
      } else {
        wald_err.add(x_next, x_cur, est, nullptr);
      }
    }

    bool cov_updated = false;
    if (want_lasso) {
      const auto tick = clock::now();
      const OnlineStepResult<double> r = online_step(state, gram, cov, basis, x_next,
                                                     cfg.eta, hopt);
      const double wall = harness_detail::ms_since(tick);
      cov_updated = true;
      if (r.path_fallback) ++metrics.lasso_fallbacks;
      metrics.lasso_kkt_worst = std::max(metrics.lasso_kkt_worst, r.kkt);
      StepRecord rec;
      rec.t = tau;
      rec.estimator = "lasso";
      rec.pred_err = lasso_err.value();
      rec.wall_ms = wall;
      rec.lambda = r.lambda;
      rec.active_count = r.active_count;
      rec.kkt = r.kkt;
      if (truth) rec.rmsd = rmsd(current_coef(state, basis), truth->coef);
      metrics.steps.push_back(std::move(rec));
    }
    if (!cov_updated) cov.update(x_next, x_cur);

    if (want_wald && cov.inverse_ready()) {
      const auto tick = clock::now();
      wald_last = bisection_sparsify(basis, cov, cfg.significance, wopt);
      const double wall = harness_detail::ms_since(tick);
      metrics.wald_ran = true;
      StepRecord rec;
      rec.t = tau;
      rec.estimator = "wald";
      rec.pred_err = wald_err.value();
      rec.wall_ms = wall;
      if (truth) rec.rmsd = rmsd(wald_last->sparsified, truth->coef);
      metrics.steps.push_back(std::move(rec));
    }
  }

  if (want_lasso) metrics.lasso_final = current_coef(state, basis);
  if (wald_last) metrics.wald_final = wald_last->sparsified;
  if (augmented) {
    bool all_seen = true;
    for (int m = 0; m < M; ++m) all_seen = all_seen && cov.phase_seen(m);
    if (all_seen) metrics.trend_est = trend_estimate(cov);
  }
  return metrics;
}

inline void write_replication_files(const RunConfig& cfg, const RunMetrics& m) {
  if (cfg.out_dir.empty()) return;
  const std::string stem = cfg.out_dir + "/rep" + std::to_string(m.replication);
  {
    std::ofstream out(stem + "_steps.jsonl");
    if (!out) throw std::runtime_error("cannot write " + stem + "_steps.jsonl");
    for (const auto& s : m.steps) out << step_to_json(s).dump() << '\n';
  }
  json fin;
  fin["replication"] = m.replication;
  fin["lasso_fallbacks"] = m.lasso_fallbacks;
  if (m.lasso_ran) {
    fin["lasso"] = coef_to_json(m.lasso_final);
    write_matrix_csv(stem + "_lasso_a_n.csv", m.lasso_final.a_n);
    write_matrix_csv(stem + "_lasso_a_f.csv", m.lasso_final.a_f);
  }
  if (m.wald_ran) {
    fin["wald"] = coef_to_json(m.wald_final);
    write_matrix_csv(stem + "_wald_a_n.csv", m.wald_final.a_n);
    write_matrix_csv(stem + "_wald_a_f.csv", m.wald_final.a_f);
  }
  if (m.trend_est.size() > 0) {
    std::vector<std::vector<double>> trend(m.trend_est.rows());
    for (Eigen::Index p = 0; p < m.trend_est.rows(); ++p)
      trend[p] = std::vector<double>(m.trend_est.row(p).begin(), m.trend_est.row(p).end());
    fin["trend"] = trend;
  }
  std::ofstream out(stem + "_final.json");
  if (!out) throw std::runtime_error("cannot write " + stem + "_final.json");
  out << fin.dump(2) << '\n';
}

/// Mean and standard deviation per (estimator, t) across replications,
/// mirroring the shaded-band presentation of the summary plots.
inline json aggregate_metrics(const std::vector<RunMetrics>& runs) {
  struct Acc {
    long n = 0;
    double sum = 0, sum2 = 0;
    void add(double v) {
      ++n;
      sum += v;
      sum2 += v * v;
    }
    json to_json() const {
      const double mean = sum / std::max<long>(n, 1);
      const double var = std::max(0.0, sum2 / std::max<long>(n, 1) - mean * mean);
      return json{{"mean", mean}, {"std", std::sqrt(var)}, {"n", n}};
    }
  };
  std::map<std::string, std::map<long, std::map<std::string, Acc>>> table;
  for (const auto& run : runs)
    for (const auto& s : run.steps) {
      auto& slot = table[s.estimator][s.t];
      slot["pred_err"].add(s.pred_err);
      slot["wall_ms"].add(s.wall_ms);
      if (s.rmsd) slot["rmsd"].add(*s.rmsd);
      if (s.lambda) slot["lambda"].add(*s.lambda);
    }
  json out = json::array();
  for (const auto& [est, by_t] : table)
    for (const auto& [t, fields] : by_t) {
      json row{{"estimator", est}, {"t", t}};
      for (const auto& [name, acc] : fields) row[name] = acc.to_json();
      out.push_back(std::move(row));
    }
  return out;
}

/// Runs all replications (concurrently when cfg.threads > 1; results are
/// independent of the thread count) and writes per-replication JSONL plus an
/// aggregate summary when an output directory is configured.
inline std::vector<RunMetrics> run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::vector<RunMetrics> runs(cfg.replications);
  if (cfg.threads <= 1) {
    for (int r = 0; r < cfg.replications; ++r) runs[r] = run_replication(cfg, r);
  } else {
    std::vector<std::future<RunMetrics>> futs;
    futs.reserve(cfg.replications);
    for (int r = 0; r < cfg.replications; ++r)
      futs.push_back(std::async(std::launch::async, [&cfg, r] { return run_replication(cfg, r); }));
    for (int r = 0; r < cfg.replications; ++r) runs[r] = futs[r].get();
  }
  if (!cfg.out_dir.empty()) {
    for (const auto& m : runs) write_replication_files(cfg, m);
    std::ofstream out(cfg.out_dir + "/summary.json");
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << aggregate_metrics(runs).dump(2) << '\n';
  }
  return runs;
}

}  // namespace prodgraph
