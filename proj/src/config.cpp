// SPDX-License-Identifier: Apache-2.0
#include <json.hpp>

#include "evolab/runtime.hpp"

namespace evolab::runtime {

namespace {

using nlohmann::ordered_json;

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["schema_version"] = 1;
  j["master_seed"] = cfg.master_seed;
  j["design_budget"] = cfg.design_budget;
  ordered_json budgets = ordered_json::array();
  for (const auto& b : cfg.budgets) {
    budgets.push_back(ordered_json{{"scale", b.scale}, {"total", b.total}});
  }
  j["budgets"] = std::move(budgets);

  ordered_json sel;
  sel["fitness_cutoff"] = cfg.selection.fitness_cutoff;
  sel["confidence_cutoff"] = cfg.selection.confidence_cutoff;
  sel["p_explore"] = cfg.selection.p_explore;
  sel["top_k"] = cfg.selection.top_k;
  sel["top_k_noise"] = cfg.selection.top_k_noise;
  sel["restart_prob"] = cfg.selection.restart_floor;
  sel["restart_anneal_rounds"] = cfg.selection.restart_anneal_rounds;
  ordered_json seed_dist = ordered_json::object();
  for (const auto& [id, p] : cfg.selection.seed_distribution) seed_dist[id] = p;
  sel["seed_distribution"] = std::move(seed_dist);
  j["selection"] = std::move(sel);

  ordered_json gp;
  gp["probs"] = cfg.gp.probs;
  gp["crossover_warmup"] = cfg.gp.crossover_warmup;
  gp["scratch_warmup"] = cfg.gp.scratch_warmup;
  j["gp"] = std::move(gp);

  ordered_json se;
  se["k_fails"] = cfg.search.k_fails;
  se["k_attempts"] = cfg.search.k_attempts;
  se["reviewer_threshold"] = cfg.search.reviewer_threshold;
  se["observer_threshold"] = cfg.search.observer_threshold;
  se["observer_enabled"] = cfg.search.observer_enabled;
  se["max_new_units"] = cfg.search.max_new_units;
  j["search"] = std::move(se);

  ordered_json gen;
  gen["success_prob"] = cfg.generator.steps.empty() ? 0.8 : cfg.generator.steps[0].success_prob;
  gen["history_tokens"] = cfg.generator.steps.empty() ? 2000.0 : cfg.generator.steps[0].history_tokens;
  gen["instruction_tokens"] =
      cfg.generator.steps.empty() ? 500.0 : cfg.generator.steps[0].instruction_tokens;
  gen["output_tokens"] = cfg.generator.steps.empty() ? 800.0 : cfg.generator.steps[0].output_tokens;
  gen["input_cost"] = cfg.generator.input_cost;
  gen["output_cost"] = cfg.generator.output_cost;
  gen["quality_lo"] = cfg.generator.quality_lo;
  gen["quality_hi"] = cfg.generator.quality_hi;
  j["generator"] = std::move(gen);

  j["landscape"] = ordered_json::parse(oracle::landscape_to_json(cfg.landscape));
  j["ablation"] = ablation_name(cfg.ablation);
  j["workers"] = ordered_json{{"designers", cfg.workers.designers},
                              {"verifiers", cfg.workers.verifiers}};
  j["erroneous_threshold"] = cfg.erroneous_threshold;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("ConfigError", std::string("config is not valid JSON: ") + e.what());
  }
  try {
    RunConfig cfg;
    maybe(j, "master_seed", cfg.master_seed);
    maybe(j, "design_budget", cfg.design_budget);
    if (j.contains("budgets")) {
      cfg.budgets.clear();
      for (const auto& b : j.at("budgets")) {
        cfg.budgets.push_back({b.at("scale").get<std::string>(), b.at("total").get<int>()});
      }
    }
    if (j.contains("selection")) {
      const auto& sel = j.at("selection");
      maybe(sel, "fitness_cutoff", cfg.selection.fitness_cutoff);
      maybe(sel, "confidence_cutoff", cfg.selection.confidence_cutoff);
      maybe(sel, "p_explore", cfg.selection.p_explore);
      maybe(sel, "top_k", cfg.selection.top_k);
      maybe(sel, "top_k_noise", cfg.selection.top_k_noise);
      maybe(sel, "restart_prob", cfg.selection.restart_floor);
      maybe(sel, "restart_anneal_rounds", cfg.selection.restart_anneal_rounds);
      if (sel.contains("seed_distribution")) {
        for (const auto& [id, p] : sel.at("seed_distribution").items()) {
          cfg.selection.seed_distribution[id] = p.get<double>();
        }
      }
    }
    if (j.contains("gp")) {
      const auto& gp = j.at("gp");
      if (gp.contains("probs")) {
        auto probs = gp.at("probs").get<std::vector<double>>();
        if (probs.size() != 3) throw ConfigError("ConfigError", "gp.probs needs three entries");
        std::copy(probs.begin(), probs.end(), cfg.gp.probs.begin());
      }
      maybe(gp, "crossover_warmup", cfg.gp.crossover_warmup);
      maybe(gp, "scratch_warmup", cfg.gp.scratch_warmup);
    }
    if (j.contains("search")) {
      const auto& se = j.at("search");
      maybe(se, "k_fails", cfg.search.k_fails);
      maybe(se, "k_attempts", cfg.search.k_attempts);
      maybe(se, "reviewer_threshold", cfg.search.reviewer_threshold);
      maybe(se, "observer_threshold", cfg.search.observer_threshold);
      maybe(se, "observer_enabled", cfg.search.observer_enabled);
      maybe(se, "max_new_units", cfg.search.max_new_units);
    }
    if (j.contains("generator")) {
      const auto& gen = j.at("generator");
      search::StepModel step;
      maybe(gen, "success_prob", step.success_prob);
      maybe(gen, "history_tokens", step.history_tokens);
      maybe(gen, "instruction_tokens", step.instruction_tokens);
      maybe(gen, "output_tokens", step.output_tokens);
      cfg.generator.steps = {step};
      maybe(gen, "input_cost", cfg.generator.input_cost);
      maybe(gen, "output_cost", cfg.generator.output_cost);
      maybe(gen, "quality_lo", cfg.generator.quality_lo);
      maybe(gen, "quality_hi", cfg.generator.quality_hi);
    }
    if (j.contains("landscape")) {
      cfg.landscape = oracle::landscape_from_json(j.at("landscape").dump());
    }
    if (j.contains("ablation")) cfg.ablation = ablation_from_name(j.at("ablation").get<std::string>());
    if (j.contains("workers")) {
      maybe(j.at("workers"), "designers", cfg.workers.designers);
      maybe(j.at("workers"), "verifiers", cfg.workers.verifiers);
    }
    maybe(j, "erroneous_threshold", cfg.erroneous_threshold);
    maybe(j, "max_designer_rounds", cfg.max_designer_rounds);

    if (cfg.design_budget < 0) throw ConfigError("ConfigError", "design_budget must be >= 0");
    if (cfg.workers.designers < 1 || cfg.workers.verifiers < 1) {
      throw ConfigError("ConfigError", "worker counts must be >= 1");
    }
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("ConfigError", e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("ConfigError", std::string("config field error: ") + e.what());
  }
}

std::string summary_to_json(const RunSummary& summary) {
  ordered_json j;
  j["schema_version"] = 1;
  j["designs_added"] = summary.designs_added;
  j["proposals_rejected"] = summary.proposals_rejected;
  j["implement_failures"] = summary.implement_failures;
  j["verification_errors"] = summary.verification_errors;
  ordered_json per_scale = ordered_json::object();
  for (const auto& [scale, n] : summary.verifications_per_scale) per_scale[scale] = n;
  j["verifications_per_scale"] = std::move(per_scale);
  j["mean_design_seconds"] = summary.mean_design_seconds;
  j["mean_verify_seconds"] = summary.mean_verify_seconds;
  j["throughput"] = summary.measured_throughput.theta;
  j["optimal_vd_ratio"] = summary.measured_throughput.r_star;
  j["generation_means"] = summary.generation_means;
  if (summary.metrics.has_value()) {
    ordered_json m;
    m["delta"] = summary.metrics->delta;
    m["delta_max"] = summary.metrics->delta_max;
    m["mdd"] = summary.metrics->mdd;
    if (summary.metrics->volatility.has_value()) m["volatility"] = *summary.metrics->volatility;
    if (summary.metrics->sharpe.has_value()) m["sharpe"] = *summary.metrics->sharpe;
    j["metrics"] = std::move(m);
  }
  return j.dump(2) + "\n";
}

}  // namespace evolab::runtime
