// SPDX-License-Identifier: Apache-2.0
//
// evolab: drive the discovery engine from the command line.
//
//   evolab evolve --config cfg.json --out outdir [--landscape l.json]
//   evolab check --tree design.json [--seed N]
//   evolab replay --log events.jsonl
//   evolab metrics --log events.jsonl [--population 50] [--step 25]
//   evolab vsgap --p 0.5 --n-max 10 --trials 100000 [--serial]
//   evolab throughput --nd 4 --nv 2 --td 21.9 --tv 12.3
//   evolab seeds --out outdir

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "evolab/checker.hpp"
#include "evolab/metrics.hpp"
#include "evolab/oracle.hpp"
#include "evolab/runtime.hpp"
#include "evolab/search.hpp"

namespace fs = std::filesystem;
using namespace evolab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw Error("IoError", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out.good()) throw Error("IoError", "cannot write '" + path.string() + "'");
  out << text;
}

int cmd_evolve(const std::string& config_path, const std::string& out_dir,
               const std::string& landscape_path) {
  runtime::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = runtime::config_from_json(slurp(config_path));
    if (!landscape_path.empty()) cfg.landscape = oracle::landscape_from_json(slurp(landscape_path));
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  }
  fs::create_directories(out_dir);
  cfg.log_path = (fs::path(out_dir) / "events.jsonl").string();

  runtime::RunResult result;
  try {
    result = runtime::run_evolution(cfg);
  } catch (const runtime::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  }
  spit(fs::path(out_dir) / "summary.json", runtime::summary_to_json(result.summary));

  metrics::GenerationSeries series;
  series.means = result.summary.generation_means;
  spit(fs::path(out_dir) / "metrics.csv", metrics::series_csv(series));

  std::cout << "designs added: " << result.summary.designs_added << "\n";
  for (const auto& [scale, n] : result.summary.verifications_per_scale) {
    std::cout << "verified at " << scale << ": " << n << "\n";
  }
  if (result.summary.metrics.has_value()) {
    std::cout << "delta: " << result.summary.metrics->delta
              << "  delta_max: " << result.summary.metrics->delta_max
              << "  mdd: " << result.summary.metrics->mdd << "\n";
  }
  std::cout << "artifacts in " << out_dir << "\n";
  return 0;
}

int cmd_check(const std::string& tree_path, uint64_t seed) {
  tree::UnitTree design;
  try {
    design = tree::tree_from_json(slurp(tree_path));
  } catch (const std::exception& e) {
    std::cerr << "cannot load tree: " << e.what() << "\n";
    return 2;
  }
  const auto report = checker::run_all(design, checker::default_checker_config(), seed);
  std::cout << report.to_json();
  return report.exit_code();
}

int cmd_replay(const std::string& log_path) {
  std::unique_ptr<store::EvoStore> st;
  try {
    st = store::replay(log_path);
  } catch (const Error& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
    return 1;
  }
  int verified = 0, erroneous = 0, seeds = 0;
  for (const auto& rec : st->all_records()) {
    if (rec.is_seed) ++seeds;
    if (rec.first_verified_seq > 0) ++verified;
    if (rec.status == store::Status::kErroneous) ++erroneous;
  }
  std::cout << "events: " << st->event_count() << "\n"
            << "designs: " << st->design_ids().size() << " (" << seeds << " seeds)\n"
            << "verified: " << verified << "\n"
            << "erroneous: " << erroneous << "\n";
  for (const auto& [scale, n] : st->used_per_scale()) {
    std::cout << "verifications at " << scale << ": " << n << "\n";
  }
  std::cout << "state digest: " << st->state_digest() << "\n";
  return 0;
}

int cmd_metrics(const std::string& log_path, int population, int step) {
  std::unique_ptr<store::EvoStore> st;
  try {
    st = store::replay(log_path);
  } catch (const Error& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
    return 1;
  }
  try {
    const auto series =
        metrics::generation_series(metrics::fitness_by_verification_order(*st), population, step);
    std::cout << metrics::series_csv(series);
    const auto m = metrics::compute_metrics(series.means);
    std::cout << "delta," << m.delta << "\n";
    std::cout << "delta_max," << m.delta_max << "\n";
    std::cout << "mdd," << m.mdd << "\n";
    std::cout << "volatility," << (m.volatility ? std::to_string(*m.volatility) : "n/a") << "\n";
    std::cout << "sharpe," << (m.sharpe ? std::to_string(*m.sharpe) : "n/a") << "\n";
  } catch (const metrics::MetricsError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_vsgap(double p, int n_max, uint64_t trials, uint64_t seed, bool serial) {
  try {
    const auto rows = search::simulate_vs_gap(p, n_max, trials, seed, !serial);
    std::cout << search::vs_gap_csv(rows);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_throughput(double nd, double nv, double td, double tv) {
  try {
    const auto tp = search::throughput(nd, nv, td, tv);
    std::cout << "theta," << tp.theta << "\n";
    std::cout << "r_star," << tp.r_star << "\n";
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_seeds(const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& seed : oracle::build_seed_trees()) {
    spit(fs::path(out_dir) / (seed.design_name + ".json"), tree::to_json(seed));
    std::cout << seed.design_name << "  units=" << tree::count_units(seed)
              << "  hash=" << tree::canonical_hash(seed) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolab: desk-scale architecture-discovery engine"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", landscape_path, tree_path, log_path;
  uint64_t seed = 42, trials = 100000;
  double p = 0.5, nd = 1, nv = 1, td = 1, tv = 1;
  int n_max = 10, population = 50, step = 25;
  bool serial = false;

  auto* evolve = app.add_subcommand("evolve", "run the evolutionary loop");
  evolve->add_option("--config", config_path, "run configuration JSON");
  evolve->add_option("--out", out_dir, "output directory")->required();
  evolve->add_option("--landscape", landscape_path, "landscape JSON override");

  auto* check = app.add_subcommand("check", "run the validity pipeline on a tree");
  check->add_option("--tree", tree_path, "unit-tree JSON document")->required();
  check->add_option("--seed", seed, "probe seed");

  auto* replay = app.add_subcommand("replay", "validate an event log and print a summary");
  replay->add_option("--log", log_path, "events.jsonl path")->required();

  auto* metrics_cmd = app.add_subcommand("metrics", "population-fitness series and metrics");
  metrics_cmd->add_option("--log", log_path, "events.jsonl path")->required();
  metrics_cmd->add_option("--population", population, "window size S_P");
  metrics_cmd->add_option("--step", step, "window step k_s");

  auto* vsgap = app.add_subcommand("vsgap", "staged-vs-direct expected-call table (CSV)");
  vsgap->add_option("--p", p, "per-unit success probability");
  vsgap->add_option("--n-max", n_max, "largest unit count");
  vsgap->add_option("--trials", trials, "Monte Carlo trials per cell");
  vsgap->add_option("--seed", seed, "Monte Carlo seed");
  vsgap->add_flag("--serial", serial, "use the serial reference kernel");

  auto* tp = app.add_subcommand("throughput", "pipeline throughput and optimal V-D ratio");
  tp->add_option("--nd", nd, "designer node count")->required();
  tp->add_option("--nv", nv, "verifier node count")->required();
  tp->add_option("--td", td, "mean design time")->required();
  tp->add_option("--tv", tv, "mean verification time")->required();

  auto* seeds_cmd = app.add_subcommand("seeds", "write the seed designs as JSON");
  seeds_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (evolve->parsed()) return cmd_evolve(config_path, out_dir, landscape_path);
  if (check->parsed()) return cmd_check(tree_path, seed);
  if (replay->parsed()) return cmd_replay(log_path);
  if (metrics_cmd->parsed()) return cmd_metrics(log_path, population, step);
  if (vsgap->parsed()) return cmd_vsgap(p, n_max, trials, seed, serial);
  if (tp->parsed()) return cmd_throughput(nd, nv, td, tv);
  if (seeds_cmd->parsed()) return cmd_seeds(out_dir);
  return 1;
}
