// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include "evolab/runtime.hpp"

namespace evolab::runtime {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex6(Rng& rng) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(6, '0');
  uint64_t bits = rng.next_u64();
  for (char& c : out) {
    c = kHex[bits & 0xf];
    bits >>= 4;
  }
  return out;
}

std::map<std::string, double> stock_seed_distribution() {
  return {{"gpt_like", 0.3}, {"mamba_like", 0.25}, {"retnet_like", 0.15},
          {"rwkv_like", 0.15}, {"ttt_like", 0.15}};
}

// Shared mutable state for one run.
struct Shared {
  const RunConfig& cfg;
  store::EvoStore store;
  sched::LadderController ladder;
  std::unique_ptr<search::Generator> generator;
  std::mutex generator_mutex;  // BernoulliGenerator::learn mutates the pool

  std::atomic<int> designs_added{0};
  std::atomic<int> designer_rounds{0};
  std::atomic<int> next_design_number{1};
  std::atomic<int> proposals_rejected{0};
  std::atomic<int> implement_failures{0};
  std::atomic<int> verification_errors{0};

  std::atomic<double> design_seconds{0.0};
  std::atomic<uint64_t> design_steps{0};
  std::atomic<double> verify_seconds{0.0};
  std::atomic<uint64_t> verify_steps{0};

  explicit Shared(const RunConfig& c) : cfg(c), ladder(c.budgets) {}

  void add_seconds(std::atomic<double>& acc, double v) {
    double cur = acc.load();
    while (!acc.compare_exchange_weak(cur, cur + v)) {
    }
  }
};

sched::SelectionConfig effective_selection(const RunConfig& cfg) {
  sched::SelectionConfig sel = cfg.selection;
  if (sel.seed_distribution.empty()) sel.seed_distribution = stock_seed_distribution();
  if (cfg.ablation == Ablation::kNoFitnessSelection) sel.uniform_random = true;
  return sel;
}

std::vector<sched::DesignView> population_views(const store::EvoStore& st, bool seeds_only) {
  std::vector<sched::DesignView> views;
  for (const auto& rec : st.all_records()) {
    if (rec.status == store::Status::kErroneous) continue;
    if (seeds_only && !rec.is_seed) continue;
    sched::DesignView v;
    v.id = rec.id;
    v.is_seed = rec.is_seed;
    v.confidence = static_cast<int>(rec.results.size());
    double sum = 0.0;
    int n = 0;
    for (const auto& [scale, tasks] : rec.results) {
      for (const auto& [task, score] : tasks) {
        sum += score;
        ++n;
      }
    }
    if (n > 0) v.fitness = sum / static_cast<double>(n);
    views.push_back(std::move(v));
  }
  return views;
}

// Deterministic per-call checker seeds, derived from the worker stream.
struct CheckerFns {
  search::CheckerFn unit_fn;
  search::CheckerFn final_fn;
};

CheckerFns make_checkers(const RunConfig& cfg, uint64_t seed_base) {
  checker::CheckerConfig partial = cfg.checker;
  partial.run_effectiveness = false;
  checker::CheckerConfig full = cfg.checker;

  auto unit_counter = std::make_shared<std::atomic<uint64_t>>(0);
  auto final_counter = std::make_shared<std::atomic<uint64_t>>(0);
  CheckerFns fns;
  fns.unit_fn = [partial, seed_base, unit_counter](const tree::UnitTree& t) {
    const uint64_t n = unit_counter->fetch_add(1);
    return checker::run_all(t, partial, derive_seed(seed_base, {0xab1e, n})).overall_pass();
  };
  fns.final_fn = [full, seed_base, final_counter](const tree::UnitTree& t) {
    const uint64_t n = final_counter->fetch_add(1);
    return checker::run_all(t, full, derive_seed(seed_base, {0xf1a1, n})).overall_pass();
  };
  return fns;
}

std::vector<std::string> mutation_targets(const tree::UnitTree& t) {
  std::vector<std::string> out;
  std::vector<const tree::UnitNode*> stack = {&t.root};
  while (!stack.empty()) {
    const tree::UnitNode* node = stack.back();
    stack.pop_back();
    if (!node->is_protected) out.push_back(node->decl.name);
    for (const auto& child : node->children) stack.push_back(&child);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// One designer iteration: select parents, gate a proposal, implement, store.
bool designer_step(Shared& sh, int worker, Rng& rng, const sched::SelectionConfig& sel,
                   const CheckerFns& checkers) {
  (void)worker;
  const RunConfig& cfg = sh.cfg;
  if (sh.designs_added.load() >= cfg.design_budget) return false;
  const int round = sh.designer_rounds.fetch_add(1);
  const int max_rounds =
      cfg.max_designer_rounds > 0 ? cfg.max_designer_rounds : cfg.design_budget * 50;
  if (round >= max_rounds) return false;

  const auto t0 = Clock::now();
  const bool seeds_only_parents =
      cfg.ablation == Ablation::kSeedsOnly || cfg.ablation == Ablation::kSeedsWithMemory;

  genome::GpKind kind = genome::choose_operation(sh.designs_added.load(), rng, cfg.gp);

  auto views = population_views(sh.store, seeds_only_parents);
  if (views.empty()) return false;
  const int wanted = kind == genome::GpKind::kCrossover ? 2 : (kind == genome::GpKind::kScratch ? 0 : 1);
  std::vector<sched::Selected> parents;
  if (wanted > 0) {
    parents = sched::select_designs(views, sched::Mode::kDesign, sel, sh.designs_added.load(), rng,
                                    wanted);
    if (static_cast<int>(parents.size()) < wanted) kind = genome::GpKind::kMutation;
  }
  if (kind == genome::GpKind::kCrossover && parents.size() < 2) kind = genome::GpKind::kMutation;

  // Proposal gate: quality draws against the reviewer threshold.
  bool accepted = false;
  double quality = 0.0;
  for (int attempt = 0; attempt < cfg.search.k_attempts; ++attempt) {
    quality = sh.generator->propose_quality(rng);
    if (quality >= cfg.search.reviewer_threshold) {
      accepted = true;
      break;
    }
  }
  if (!accepted) {
    sh.proposals_rejected.fetch_add(1);
    sh.add_seconds(sh.design_seconds, seconds_since(t0));
    sh.design_steps.fetch_add(1);
    return true;
  }

  const int number = sh.next_design_number.fetch_add(1);
  char idbuf[16];
  std::snprintf(idbuf, sizeof(idbuf), "d%05d", number);
  const std::string design_id = idbuf;

  store::DesignRecord parent_a_rec, parent_b_rec;
  search::Proposal proposal;
  proposal.kind = kind;
  proposal.design_name = design_id;
  proposal.plan_units = 1 + static_cast<int>(rng.below(3));

  std::string branch;
  std::vector<std::string> parent_ids;
  for (const auto& p : parents) {
    parent_ids.push_back(p.id);
    branch += (branch.empty() ? "" : "+") + p.branch;
  }
  if (branch.empty()) branch = "scratch";

  switch (kind) {
    case genome::GpKind::kMutation: {
      parent_a_rec = sh.store.record(parents[0].id);
      proposal.parent_a = &parent_a_rec.design;
      const auto targets = mutation_targets(parent_a_rec.design);
      if (targets.empty()) return true;
      proposal.target_unit = targets[rng.below(targets.size())];
      proposal.root_decl.name = "Mut_" + hex6(rng);
      proposal.root_decl.requirements = "mutated replacement for " + proposal.target_unit;
      proposal.root_decl.inputs = {"X"};
      proposal.root_decl.outputs = {"Y"};
      break;
    }
    case genome::GpKind::kCrossover: {
      parent_a_rec = sh.store.record(parents[0].id);
      parent_b_rec = sh.store.record(parents[1].id);
      proposal.parent_a = &parent_a_rec.design;
      proposal.parent_b = &parent_b_rec.design;
      proposal.root_decl.name = "Xov_" + hex6(rng);
      proposal.root_decl.requirements = "crossover of " + parents[0].id + " and " + parents[1].id;
      proposal.root_decl.inputs = {"X"};
      proposal.root_decl.outputs = {"Y"};
      // Reuse one or two non-protected top-level subtrees from each parent,
      // skipping name collisions.
      std::set<std::string> taken;
      auto pick_grafts = [&](const tree::UnitTree& t, genome::SourceRef::Tree which) {
        std::vector<std::string> names;
        for (const auto& child : t.root.children) names.push_back(child.decl.name);
        if (names.empty()) return;
        const int want = 1 + static_cast<int>(rng.below(std::min<uint64_t>(2, names.size())));
        for (int i = 0; i < want; ++i) {
          const std::string& name = names[rng.below(names.size())];
          const tree::UnitNode* node = tree::find_unit(t, name);
          bool collides = taken.count(name) > 0;
          if (node != nullptr) {
            for (const auto& [unit, cnt] : tree::unit_bag({"tmp", *node})) {
              if (taken.count(unit)) collides = true;
            }
          }
          if (collides) continue;
          if (node != nullptr) {
            for (const auto& [unit, cnt] : tree::unit_bag({"tmp", *node})) taken.insert(unit);
          }
          proposal.grafts.push_back({which, name});
        }
      };
      pick_grafts(parent_a_rec.design, genome::SourceRef::Tree::kA);
      pick_grafts(parent_b_rec.design, genome::SourceRef::Tree::kB);
      if (proposal.grafts.empty()) {
        sh.implement_failures.fetch_add(1);
        sh.add_seconds(sh.design_seconds, seconds_since(t0));
        sh.design_steps.fetch_add(1);
        return true;
      }
      break;
    }
    case genome::GpKind::kScratch: {
      proposal.root_decl.name = "Scr_" + hex6(rng);
      proposal.root_decl.requirements = "designed from scratch";
      proposal.root_decl.inputs = {"X"};
      proposal.root_decl.outputs = {"Y"};
      proposal.plan_units = 2 + static_cast<int>(rng.below(3));
      break;
    }
  }

  search::ImplementResult impl;
  {
    std::lock_guard lock(sh.generator_mutex);
    impl = search::implement(proposal, *sh.generator, checkers.unit_fn, checkers.final_fn,
                             cfg.search, rng);
  }
  if (!impl.success()) {
    sh.implement_failures.fetch_add(1);
    sh.add_seconds(sh.design_seconds, seconds_since(t0));
    sh.design_steps.fetch_add(1);
    return true;
  }

  // Claim a budget slot; concurrent designers may race past the entry check.
  int slot = sh.designs_added.load();
  do {
    if (slot >= cfg.design_budget) {
      sh.add_seconds(sh.design_seconds, seconds_since(t0));
      sh.design_steps.fetch_add(1);
      return false;
    }
  } while (!sh.designs_added.compare_exchange_weak(slot, slot + 1));

  store::DesignInput input;
  input.id = design_id;
  input.design = *impl.result;
  input.program = dsl::print(tree::compose(*impl.result).program);
  input.parents = parent_ids;
  input.op = genome::gp_kind_name(kind);
  input.quality = quality;
  input.round = round;
  input.is_seed = false;
  input.selection_branch = branch;
  sh.store.add_design(input);
  sh.store.set_status(design_id, store::Status::kImplemented);
  sh.add_seconds(sh.design_seconds, seconds_since(t0));
  sh.design_steps.fetch_add(1);
  return true;
}

// One verifier iteration. Returns false when nothing is actionable.
bool verifier_step(Shared& sh, int worker, Rng& rng, const sched::SelectionConfig& sel) {
  const RunConfig& cfg = sh.cfg;
  const auto t0 = Clock::now();

  auto views = population_views(sh.store, /*seeds_only=*/false);
  if (views.empty()) return false;

  std::string chosen_id, chosen_branch;
  std::optional<std::string> scale;
  for (int attempt = 0; attempt < 4 && !scale.has_value(); ++attempt) {
    const auto picked =
        sched::select_designs(views, sched::Mode::kVerify, sel, sh.designs_added.load(), rng, 1);
    const auto rec = sh.store.record(picked.front().id);
    std::set<std::string> verified;
    for (const auto& [s, tasks] : rec.results) verified.insert(s);
    scale = sh.ladder.try_acquire(verified);
    if (scale.has_value()) {
      chosen_id = picked.front().id;
      chosen_branch = picked.front().branch;
    }
  }
  if (!scale.has_value()) {
    // Sweep in insertion order so stragglers still get verified.
    for (const auto& v : views) {
      const auto rec = sh.store.record(v.id);
      std::set<std::string> verified;
      for (const auto& [s, tasks] : rec.results) verified.insert(s);
      scale = sh.ladder.try_acquire(verified);
      if (scale.has_value()) {
        chosen_id = v.id;
        chosen_branch = "sweep";
        break;
      }
    }
  }
  if (!scale.has_value()) return false;

  const auto rec = sh.store.record(chosen_id);
  try {
    Rng oracle_rng = derive_rng(cfg.master_seed, {0x0bac1e, static_cast<uint64_t>(worker),
                                                  sh.verify_steps.fetch_add(1)});
    const auto scores = oracle::oracle_scores(rec.design, *scale, cfg.landscape, oracle_rng);
    // The store is the linearization point: if another verifier landed the
    // same (design, scale) pair first, release the reservation.
    try {
      sh.store.record_verification(chosen_id, *scale, scores, chosen_branch);
      sh.ladder.commit(*scale);
    } catch (const store::StoreError&) {
      sh.ladder.abort(*scale);
    }
  } catch (const oracle::VerificationError&) {
    sh.ladder.abort(*scale);
    sh.store.record_verification_error(chosen_id, cfg.erroneous_threshold);
    sh.verification_errors.fetch_add(1);
  }
  sh.add_seconds(sh.verify_seconds, seconds_since(t0));
  return true;
}

bool verifier_can_act(Shared& sh) {
  const auto available = sh.ladder.available();
  bool any_scale = false;
  for (const auto& [scale, n] : available) any_scale = any_scale || n > 0;
  if (!any_scale) return false;
  for (const auto& rec : sh.store.all_records()) {
    if (rec.status == store::Status::kErroneous) continue;
    std::set<std::string> verified;
    for (const auto& [s, tasks] : rec.results) verified.insert(s);
    const auto scale =
        sched::select_scale(verified, sh.ladder.committed(), sh.cfg.budgets);
    if (scale.has_value()) return true;
  }
  return false;
}

void finalize_summary(Shared& sh, RunSummary& summary) {
  summary.designs_added = sh.designs_added.load();
  summary.proposals_rejected = sh.proposals_rejected.load();
  summary.implement_failures = sh.implement_failures.load();
  summary.verification_errors = sh.verification_errors.load();
  summary.verifications_per_scale = sh.store.used_per_scale();
  const uint64_t d_steps = sh.design_steps.load();
  const uint64_t v_steps = sh.verify_steps.load();
  summary.mean_design_seconds = d_steps ? sh.design_seconds.load() / static_cast<double>(d_steps) : 0.0;
  summary.mean_verify_seconds = v_steps ? sh.verify_seconds.load() / static_cast<double>(v_steps) : 0.0;
  if (summary.mean_design_seconds > 0.0 && summary.mean_verify_seconds > 0.0) {
    summary.measured_throughput = search::throughput(
        sh.cfg.workers.designers, sh.cfg.workers.verifiers, summary.mean_design_seconds,
        summary.mean_verify_seconds);
  }
  try {
    const auto series = metrics::generation_series(
        metrics::fitness_by_verification_order(sh.store), 50, 25);
    summary.generation_means = series.means;
    summary.metrics = metrics::compute_metrics(series.means);
  } catch (const metrics::MetricsError&) {
    // Short runs produce no generation series; the summary just omits it.
  }
}

}  // namespace

RunConfig::RunConfig() : checker(checker::default_checker_config()) {}

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoFitnessSelection: return "no_fitness_selection";
    case Ablation::kSeedsOnly: return "seeds_only";
    case Ablation::kSeedsWithMemory: return "seeds_with_memory";
  }
  return "?";
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "full") return Ablation::kFull;
  if (name == "no_fitness_selection") return Ablation::kNoFitnessSelection;
  if (name == "seeds_only") return Ablation::kSeedsOnly;
  if (name == "seeds_with_memory") return Ablation::kSeedsWithMemory;
  throw ConfigError("ConfigError", "unknown ablation '" + name + "'");
}

RunResult run_evolution(const RunConfig& cfg) {
  if (cfg.design_budget < 0 || cfg.workers.designers < 1 || cfg.workers.verifiers < 1) {
    throw ConfigError("ConfigError", "design budget and worker counts must be positive");
  }
  if (cfg.budgets.empty()) throw ConfigError("ConfigError", "no verification budgets configured");

  Shared sh(cfg);
  if (!cfg.log_path.empty()) sh.store.open_log(cfg.log_path);

  search::BernoulliGenerator::Options gen_opts;
  gen_opts.enable_learning = cfg.ablation == Ablation::kSeedsWithMemory;
  sh.generator = std::make_unique<search::BernoulliGenerator>(cfg.generator, gen_opts);

  // Seed population: added and marked implemented before any worker runs.
  for (const auto& seed : oracle::build_seed_trees()) {
    store::DesignInput input;
    input.id = seed.design_name;
    input.design = seed;
    input.program = dsl::print(tree::compose(seed).program);
    input.op = "seed";
    input.is_seed = true;
    input.selection_branch = "seed";
    sh.store.add_design(input);
    sh.store.set_status(seed.design_name, store::Status::kImplemented);
  }

  const sched::SelectionConfig sel = effective_selection(cfg);

  RunResult out;
  if (cfg.workers.designers == 1 && cfg.workers.verifiers == 1) {
    // Deterministic round-robin driver.
    Rng d_rng = derive_rng(cfg.master_seed, {0xde519, 0});
    Rng v_rng = derive_rng(cfg.master_seed, {0x7e41f, 0});
    const CheckerFns checkers = make_checkers(cfg, derive_seed(cfg.master_seed, {0xc4ec, 0}));
    for (;;) {
      const bool designed = designer_step(sh, 0, d_rng, sel, checkers);
      const bool verified = verifier_step(sh, 0, v_rng, sel);
      if (sh.designs_added.load() >= cfg.design_budget || !designed) {
        // Drain the verifier once designing is done.
        while (verifier_step(sh, 0, v_rng, sel)) {
        }
        break;
      }
      (void)verified;
    }
  } else {
    std::vector<std::thread> threads;
    std::atomic<bool> designers_done{false};
    for (int i = 0; i < cfg.workers.designers; ++i) {
      threads.emplace_back([&, i] {
        Rng rng = derive_rng(cfg.master_seed, {0xde519, static_cast<uint64_t>(i)});
        const CheckerFns checkers =
            make_checkers(cfg, derive_seed(cfg.master_seed, {0xc4ec, static_cast<uint64_t>(i)}));
        while (sh.designs_added.load() < cfg.design_budget) {
          if (!designer_step(sh, i, rng, sel, checkers)) break;
        }
      });
    }
    for (int i = 0; i < cfg.workers.verifiers; ++i) {
      threads.emplace_back([&, i] {
        Rng rng = derive_rng(cfg.master_seed, {0x7e41f, static_cast<uint64_t>(i)});
        for (;;) {
          const bool acted = verifier_step(sh, i, rng, sel);
          if (!acted) {
            if (designers_done.load() && !verifier_can_act(sh)) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
          }
        }
      });
    }
    for (int i = 0; i < cfg.workers.designers; ++i) threads[static_cast<size_t>(i)].join();
    designers_done.store(true);
    for (size_t i = static_cast<size_t>(cfg.workers.designers); i < threads.size(); ++i) {
      threads[i].join();
    }
  }

  finalize_summary(sh, out.summary);
  out.evo_store = std::make_unique<store::EvoStore>();
  // Hand the populated store out by replaying its own event stream; the
  // in-memory store cannot be moved (mutex member).
  std::ostringstream log;
  log << "{\"schema_version\":1}\n";
  for (const auto& event : sh.store.events()) log << store::event_to_line(event) << "\n";
  out.evo_store = store::replay_text(log.str());
  return out;
}

RatioReport worker_ratio_report(const RunConfig& cfg, double measured_t_d, double measured_t_v) {
  RatioReport report;
  report.t_d = measured_t_d;
  report.t_v = measured_t_v;
  report.tp = search::throughput(cfg.workers.designers, cfg.workers.verifiers, measured_t_d,
                                 measured_t_v);
  return report;
}

}  // namespace evolab::runtime
