// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "evolab/runtime.hpp"

using namespace evolab;
namespace fs = std::filesystem;

namespace {

runtime::RunConfig small_config(uint64_t seed, int budget) {
  runtime::RunConfig cfg;
  cfg.master_seed = seed;
  cfg.design_budget = budget;
  cfg.generator.steps = {{0.85, 2000, 500, 800}};
  cfg.landscape.sigma_obs = 0.02;
  cfg.landscape.error_rate = 0.05;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path temp_file(const char* tag) {
  return fs::temp_directory_path() / (std::string("evolab_runtime_") + tag + ".jsonl");
}

}  // namespace

TEST_SUITE("runtime") {

TEST_CASE("a budget-one run yields the five seeds plus one verified design") {
  runtime::RunConfig cfg = small_config(5, 1);
  cfg.generator.steps = {{1.0, 2000, 500, 800}};  // p = 1: implementation cannot fail
  cfg.generator.quality_lo = 5.0;                 // proposals always clear the reviewer
  cfg.landscape.error_rate = 0.0;
  const auto result = runtime::run_evolution(cfg);
  CHECK(result.summary.designs_added == 1);

  const auto ids = result.evo_store->design_ids();
  CHECK(ids.size() == 6);
  int seeds = 0;
  bool new_design_verified = false;
  for (const auto& id : ids) {
    const auto rec = result.evo_store->record(id);
    if (rec.is_seed) {
      ++seeds;
    } else {
      CHECK(rec.status == store::Status::kVerified);
      new_design_verified = rec.first_verified_seq > 0;
      CHECK(rec.round >= 0);
      CHECK_FALSE((rec.parents.empty() && rec.op == "mutation"));
    }
  }
  CHECK(seeds == 5);
  CHECK(new_design_verified);
}

TEST_CASE("equal master seeds produce byte-identical event logs") {
  const auto log_a = temp_file("det_a"), log_b = temp_file("det_b");
  for (int i = 0; i < 2; ++i) {
    runtime::RunConfig cfg = small_config(77, 12);
    cfg.log_path = (i == 0 ? log_a : log_b).string();
    runtime::run_evolution(cfg);
  }
  const std::string a = slurp(log_a), b = slurp(log_b);
  CHECK(a.size() > 0);
  CHECK(a == b);
  fs::remove(log_a);
  fs::remove(log_b);
}

TEST_CASE("replay of a produced log reconstructs the final store") {
  const auto log = temp_file("replay");
  runtime::RunConfig cfg = small_config(31, 10);
  cfg.log_path = log.string();
  const auto result = runtime::run_evolution(cfg);
  const auto replayed = store::replay(log.string());
  CHECK(replayed->state_digest() == result.evo_store->state_digest());

  // Any event-boundary prefix of the log still replays.
  std::istringstream in(slurp(log));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() > 10);
  for (size_t keep : {lines.size() / 3, lines.size() / 2, lines.size() - 1}) {
    std::string prefix;
    for (size_t i = 0; i < keep; ++i) prefix += lines[i] + "\n";
    CHECK_NOTHROW(store::replay_text(prefix));
  }
  fs::remove(log);
}

TEST_CASE("the no-fitness ablation never touches a fitness-sorted branch") {
  runtime::RunConfig cfg = small_config(13, 15);
  cfg.ablation = runtime::Ablation::kNoFitnessSelection;
  const auto result = runtime::run_evolution(cfg);
  int audited = 0;
  for (const auto& event : result.evo_store->events()) {
    std::string branch;
    if (event.kind == "DesignAdded") {
      branch = event.payload.value("selection_branch", "");
      if (event.payload.value("is_seed", false)) continue;
    } else if (event.kind == "VerificationRecorded") {
      branch = event.payload.value("selection_branch", "");
    } else {
      continue;
    }
    CAPTURE(branch);
    for (const char* fitness_branch : {"exploit", "explore", "noise", "restart"}) {
      CHECK(branch.find(fitness_branch) == std::string::npos);
    }
    ++audited;
  }
  CHECK(audited > 10);
}

TEST_CASE("budget conservation holds in every run") {
  runtime::RunConfig cfg = small_config(99, 20);
  cfg.budgets = {{"14M", 12}, {"31M", 5}, {"70M", 2}};
  const auto result = runtime::run_evolution(cfg);
  for (const auto& [scale, used] : result.evo_store->used_per_scale()) {
    int total = 0;
    for (const auto& b : cfg.budgets) {
      if (b.scale == scale) total = b.total;
    }
    CHECK(used <= total);
  }
}

TEST_CASE("multi-worker threaded runs preserve the store invariants") {
  const auto log = temp_file("threads");
  runtime::RunConfig cfg = small_config(5150, 16);
  cfg.workers.designers = 2;
  cfg.workers.verifiers = 2;
  cfg.log_path = log.string();
  const auto result = runtime::run_evolution(cfg);
  CHECK(result.summary.designs_added == 16);

  // Gap-free events, replayable log, budgets conserved.
  uint64_t prev = 0;
  for (const auto& event : result.evo_store->events()) {
    CHECK(event.seq == prev + 1);
    prev = event.seq;
  }
  const auto replayed = store::replay(log.string());
  CHECK(replayed->state_digest() == result.evo_store->state_digest());
  for (const auto& [scale, used] : result.evo_store->used_per_scale()) {
    for (const auto& b : cfg.budgets) {
      if (b.scale == scale) CHECK(used <= b.total);
    }
  }
  fs::remove(log);
}

TEST_CASE("worker ratio report wraps the throughput calculators") {
  runtime::RunConfig cfg;
  cfg.workers.designers = 1;
  cfg.workers.verifiers = 1;
  const auto balanced = runtime::worker_ratio_report(cfg, 10.0, 10.0);
  CHECK(balanced.tp.r_star == doctest::Approx(1.0));
  const auto skewed = runtime::worker_ratio_report(cfg, 10.0, 5.6);
  CHECK(skewed.tp.r_star == doctest::Approx(0.56));
}

TEST_CASE("config files round-trip and invalid configs raise ConfigError") {
  runtime::RunConfig cfg = small_config(3, 7);
  cfg.ablation = runtime::Ablation::kSeedsWithMemory;
  cfg.selection.p_explore = 0.2;
  const auto back = runtime::config_from_json(runtime::config_to_json(cfg));
  CHECK(back.master_seed == 3);
  CHECK(back.design_budget == 7);
  CHECK(back.ablation == runtime::Ablation::kSeedsWithMemory);
  CHECK(back.selection.p_explore == 0.2);
  CHECK(back.generator.steps[0].success_prob == doctest::Approx(0.85));

  CHECK_THROWS_AS(runtime::config_from_json("{not json"), runtime::ConfigError);
  CHECK_THROWS_AS(runtime::config_from_json("{\"ablation\": \"bogus\"}"), runtime::ConfigError);
  CHECK_THROWS_AS(runtime::config_from_json("{\"workers\": {\"designers\": 0}}"),
                  runtime::ConfigError);
}

TEST_CASE("seed-restricted ablations keep parents within the five starting designs") {
  const std::set<std::string> seed_ids = {"gpt_like", "mamba_like", "retnet_like", "rwkv_like",
                                          "ttt_like"};
  for (auto ablation : {runtime::Ablation::kSeedsOnly, runtime::Ablation::kSeedsWithMemory}) {
    runtime::RunConfig cfg = small_config(21, 10);
    cfg.ablation = ablation;
    const auto result = runtime::run_evolution(cfg);
    CHECK(result.summary.designs_added == 10);
    for (const auto& id : result.evo_store->design_ids()) {
      const auto rec = result.evo_store->record(id);
      for (const auto& parent : rec.parents) {
        CHECK(seed_ids.count(parent) == 1);
      }
    }
  }
}

}  // TEST_SUITE
