// Command-line driver: synthetic stream generation, CSV ingestion checks,
// online experiment runs and result aggregation.
//
// Exit codes: 0 ok, 2 input/schema error, 3 solver abort.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "prodgraph/prodgraph.hpp"

namespace fs = std::filesystem;
using namespace prodgraph;

namespace {

int run_synth(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (int rep = 0; rep < cfg.replications; ++rep) {
    const std::uint64_t model_seed = cfg.seed + 7919u * static_cast<std::uint64_t>(rep);
    const auto model = random_true_model<double>(cfg.dims, cfg.edge_density, cfg.value_scale,
                                                 cfg.target_norm, model_seed, cfg.noise_scale,
                                                 cfg.trend_scale);
    const long burn = StreamSimulator<double>::default_burn_in(model.spectral_norm);
    const auto stream = simulate(model, cfg.t_total, burn, model_seed ^ 0x9e3779b97f4a7c15ull);
    const std::string stem = out_dir + "/rep" + std::to_string(rep);
    write_stream_csv(stem + "_stream.csv", stream, cfg.dims);
    std::ofstream out(stem + "_truth.json");
    out << model_to_json(model).dump(2) << '\n';
  }
  std::cout << "wrote " << cfg.replications << " stream(s) to " << out_dir << "\n";
  return 0;
}

int run_ingest(const std::string& path, const std::string& reexport) {
  const auto res = ingest_csv<double>(path);
  std::cout << "nodes: " << res.dims.n_nodes << "\nfeatures: " << res.dims.n_features
            << "\ntime points: " << res.stream.cols() << "\n";
  if (!reexport.empty()) write_stream_csv(reexport, res.stream, res.dims);
  return 0;
}

int run_run(RunConfig& cfg) {
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
  const auto runs = run_experiment(cfg);
  long fallbacks = 0;
  for (const auto& r : runs) fallbacks += r.lasso_fallbacks;
  std::cout << "replications: " << runs.size() << "\n";
  for (const auto& r : runs) {
    std::cout << "rep " << r.replication << ": " << r.steps.size() << " step records";
    if (!r.steps.empty()) {
      const auto& last = r.steps.back();
      std::cout << ", final pred_err " << last.pred_err;
      if (last.rmsd) std::cout << ", final rmsd " << *last.rmsd;
    }
    std::cout << "\n";
  }
  if (fallbacks > 0) std::cout << "path fallbacks: " << fallbacks << "\n";
  return 0;
}

int run_report(const std::string& dir) {
  // Re-aggregate the per-replication step files into summary.json.
  std::vector<RunMetrics> runs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 12 || name.substr(name.size() - 12) != "_steps.jsonl") continue;
    RunMetrics m;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      StepRecord r;
      r.t = j.at("t").get<long>();
      r.estimator = j.at("estimator").get<std::string>();
      r.pred_err = j.at("pred_err").get<double>();
      r.wall_ms = j.at("wall_ms").get<double>();
      if (j.contains("rmsd")) r.rmsd = j["rmsd"].get<double>();
      if (j.contains("lambda")) r.lambda = j["lambda"].get<double>();
      m.steps.push_back(std::move(r));
    }
    runs.push_back(std::move(m));
  }
  if (runs.empty()) {
    std::cerr << "report: no *_steps.jsonl files in " << dir << "\n";
    return 2;
  }
  std::ofstream out(dir + "/summary.json");
  out << aggregate_metrics(runs).dump(2) << '\n';
  std::cout << "aggregated " << runs.size() << " replication(s) into " << dir
            << "/summary.json\n";
  return 0;
}

void add_model_flags(CLI::App* app, RunConfig& cfg, int& n, int& f, int& m) {
  app->add_option("-N,--nodes", n, "number of nodes");
  app->add_option("-F,--features", f, "number of features");
  app->add_option("-M,--period", m, "trend period (1 = stationary)");
  app->add_option("--t-total", cfg.t_total, "number of samples after x_0");
  app->add_option("--replications", cfg.replications, "independent replications");
  app->add_option("--seed", cfg.seed, "base RNG seed");
  app->add_option("--edge-density", cfg.edge_density, "spatial edge probability");
  app->add_option("--target-norm", cfg.target_norm, "spectral norm of the true coefficient");
  app->add_option("--value-scale", cfg.value_scale, "coefficient value scale");
  app->add_option("--noise-scale", cfg.noise_scale, "noise standard deviation");
  app->add_option("--trend-scale", cfg.trend_scale, "trend amplitude scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online Granger-causal product-graph learning for matrix-variate time series"};
  app.require_subcommand(1);

  RunConfig cfg;
  int n = cfg.dims.n_nodes, f = cfg.dims.n_features, m = cfg.dims.period;
  std::string out_dir = "out";
  std::string csv_path, reexport;
  std::string mode = "both";

  auto* synth = app.add_subcommand("synth", "generate synthetic streams to CSV");
  add_model_flags(synth, cfg, n, f, m);
  synth->add_option("-o,--out", out_dir, "output directory");

  auto* ingest = app.add_subcommand("ingest", "validate a stream CSV");
  ingest->add_option("path", csv_path, "CSV file (long or wide format)")->required();
  ingest->add_option("--reexport", reexport, "write the normalized long-format CSV here");

  auto* run = app.add_subcommand("run", "run the online experiment");
  add_model_flags(run, cfg, n, f, m);
  run->set_config("--config", "", "TOML/INI config file; explicit flags override it");
  run->add_option("--input", csv_path, "ingest this CSV instead of simulating");
  run->add_option("--mode", mode, "estimators: low, high or both");
  run->add_option("--t0", cfg.t0, "warm-start sample count");
  run->add_option("--lambda0", cfg.lambda0, "initial penalty");
  run->add_option("--eta", cfg.eta, "penalty step size");
  run->add_option("--significance", cfg.significance, "Wald significance level");
  run->add_flag("--f-test", cfg.use_f_statistic, "use the F-statistic variant");
  run->add_option("--threads", cfg.threads, "concurrent replications");
  run->add_option("-o,--out", cfg.out_dir, "output directory for JSONL metrics");

  auto* report = app.add_subcommand("report", "aggregate per-replication JSONL metrics");
  report->add_option("dir", out_dir, "directory holding *_steps.jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.dims = GraphDims(n, f, m);
    if (mode == "low")
      cfg.mode = EstimatorMode::LowDim;
    else if (mode == "high")
      cfg.mode = EstimatorMode::HighDim;
    else if (mode == "both")
      cfg.mode = EstimatorMode::Both;
    else
      throw SchemaError("unknown mode '" + mode + "'");
    if (!csv_path.empty() && run->parsed()) {
      cfg.input = InputKind::Csv;
      cfg.csv_path = csv_path;
    }

    if (synth->parsed()) return run_synth(cfg, out_dir);
    if (ingest->parsed()) return run_ingest(csv_path, reexport);
    if (run->parsed()) return run_run(cfg);
    if (report->parsed()) return run_report(out_dir);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PathAbortError& e) {
    std::cerr << "solver abort: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
