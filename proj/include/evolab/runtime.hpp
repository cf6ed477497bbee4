// SPDX-License-Identifier: Apache-2.0
#pragma once

// The evolutionary loop: designer workers select parents, choose a GP
// operation, gate proposals, implement them through the staged search, and add
// results to the store; verifier workers pick designs and scales under the
// ladder policy and record oracle scores. All coordination happens through
// the store and the budget ledger. With one designer and one verifier the loop
// runs as a deterministic round-robin (byte-identical logs per master seed);
// larger worker counts run as real threads.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evolab/checker.hpp"
#include "evolab/genome.hpp"
#include "evolab/metrics.hpp"
#include "evolab/oracle.hpp"
#include "evolab/scheduler.hpp"
#include "evolab/search.hpp"
#include "evolab/store.hpp"

namespace evolab::runtime {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Ablation { kFull, kNoFitnessSelection, kSeedsOnly, kSeedsWithMemory };
const char* ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct WorkerCounts {
  int designers = 1;
  int verifiers = 1;
};

struct RunConfig {
  uint64_t master_seed = 1;
  int design_budget = 50;  // non-seed designs to produce
  std::vector<sched::ScaleBudget> budgets = {
      {"14M", 1000}, {"31M", 400}, {"70M", 150}, {"125M", 40}};
  sched::SelectionConfig selection;      // empty seed_distribution -> stock seed weights
  search::SearchConfig search;
  genome::GpChoiceConfig gp;
  search::GeneratorModel generator;
  oracle::Landscape landscape;
  checker::CheckerConfig checker;        // defaulted via default_checker_config()
  Ablation ablation = Ablation::kFull;
  WorkerCounts workers;
  int erroneous_threshold = 1;           // failed runs before a design is erroneous
  int max_designer_rounds = 0;           // 0 = design_budget * 50 safety valve
  std::string log_path;                  // empty = in-memory only

  RunConfig();
};

struct RunSummary {
  int designs_added = 0;
  int proposals_rejected = 0;
  int implement_failures = 0;
  int verification_errors = 0;
  std::map<std::string, int> verifications_per_scale;
  double mean_design_seconds = 0.0;
  double mean_verify_seconds = 0.0;
  search::Throughput measured_throughput{0.0, 0.0};
  std::vector<double> generation_means;
  std::optional<metrics::MetricSet> metrics;
};

struct RunResult {
  std::unique_ptr<store::EvoStore> evo_store;
  RunSummary summary;
};

RunResult run_evolution(const RunConfig& cfg);

struct RatioReport {
  double t_d = 0.0;
  double t_v = 0.0;
  search::Throughput tp{0.0, 0.0};
};

/// Wraps the throughput calculators with run-measured (or supplied) stage
/// times.
RatioReport worker_ratio_report(const RunConfig& cfg, double measured_t_d, double measured_t_v);

std::string summary_to_json(const RunSummary& summary);
RunConfig config_from_json(const std::string& text);  // ConfigError on bad input
std::string config_to_json(const RunConfig& cfg);

}  // namespace evolab::runtime
