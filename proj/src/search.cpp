// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "evolab/mc.hpp"
#include "evolab/search.hpp"

namespace evolab::search {

// ---------------------------------------------------------------------------
// Calculators
// ---------------------------------------------------------------------------

double expected_calls_direct(double p_valid) {
  if (p_valid <= 0.0 || p_valid > 1.0) {
    throw SearchError("DomainError", "p_valid must be in (0, 1]");
  }
  return 1.0 / p_valid;
}

double expected_calls_vs(const std::vector<double>& step_probs) {
  double total = 0.0;
  for (double p : step_probs) {
    if (p <= 0.0 || p > 1.0) throw SearchError("DomainError", "p_k must be in (0, 1]");
    total += 1.0 / p;
  }
  return total;
}

double expected_calls_vs(const GeneratorModel& model) {
  std::vector<double> probs;
  probs.reserve(model.steps.size());
  for (const auto& s : model.steps) probs.push_back(s.success_prob);
  return expected_calls_vs(probs);
}

double expected_cost_vs(const GeneratorModel& model) {
  double total = 0.0;
  for (size_t k = 0; k < model.steps.size(); ++k) {
    const double p = model.steps[k].success_prob;
    if (p <= 0.0 || p > 1.0) throw SearchError("DomainError", "p_k must be in (0, 1]");
    total += model.attempt_cost(k) / p;
  }
  return total;
}

double expected_cost_direct(const GeneratorModel& model) {
  return expected_calls_direct(model.p_valid()) * model.full_attempt_cost();
}

double yield_rate(double q, double e, double c, double b) {
  if (c <= 0.0) throw SearchError("DomainError", "cost per sample must be positive");
  return q * e * b / c;
}

Throughput throughput(double n_d, double n_v, double t_d, double t_v) {
  if (t_d <= 0.0 || t_v <= 0.0) throw SearchError("DomainError", "stage times must be positive");
  return Throughput{std::min(n_d / t_d, n_v / t_v), t_v / t_d};
}

double design_time_with_errors(double t_d_bar, double err) {
  if (err < 0.0 || err >= 1.0) throw SearchError("DomainError", "error rate must be in [0, 1)");
  return t_d_bar / (1.0 - err);
}

double expected_verify_seconds(const std::vector<double>& per_scale_seconds,
                               const std::vector<double>& select_ratios) {
  if (per_scale_seconds.empty() || select_ratios.size() + 1 != per_scale_seconds.size()) {
    throw SearchError("DomainError", "need one selection ratio per adjacent scale pair");
  }
  double weight = 1.0, num = 0.0, den = 0.0;
  for (size_t i = 0; i < per_scale_seconds.size(); ++i) {
    if (i > 0) weight *= select_ratios[i - 1];
    num += per_scale_seconds[i] * weight;
    den += weight;
  }
  return num / den;
}

std::vector<VsGapRow> simulate_vs_gap(double p, int n_max, uint64_t trials, uint64_t seed,
                                      bool parallel) {
  if (p <= 0.0 || p > 1.0) throw SearchError("DomainError", "p must be in (0, 1]");
  std::vector<VsGapRow> rows;
  const mc::Exec exec = parallel ? mc::Exec::kParallel : mc::Exec::kSerial;
  for (int n = 1; n <= n_max; ++n) {
    const GeneratorModel model = uniform_model(p, n);
    VsGapRow row;
    row.n = n;
    row.analytic_direct = std::pow(1.0 / p, n);
    row.analytic_vs = static_cast<double>(n) / p;
    row.empirical_direct =
        mc::simulate_direct(model, trials, derive_seed(seed, {static_cast<uint64_t>(n), 1}), exec)
            .mean_calls;
    row.empirical_vs =
        mc::simulate_vs(model, trials, derive_seed(seed, {static_cast<uint64_t>(n), 2}), exec)
            .mean_calls;
    row.ratio = row.analytic_direct / row.analytic_vs;
    rows.push_back(row);
  }
  return rows;
}

std::string vs_gap_csv(const std::vector<VsGapRow>& rows) {
  std::ostringstream out;
  out << "N,analytic_direct,analytic_vs,empirical_direct,empirical_vs,ratio\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.analytic_direct << ',' << r.analytic_vs << ',' << r.empirical_direct
        << ',' << r.empirical_vs << ',' << r.ratio << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Staged implementation
// ---------------------------------------------------------------------------

namespace {

tree::UnitNode placeholder_node(const tree::UnitDecl& decl) {
  tree::UnitNode node;
  node.decl = decl;
  node.body.reset();
  return node;
}

struct AttemptState {
  tree::UnitTree tree;
  std::deque<std::string> frontier;
  int remaining_new = 0;
  bool force_reuse_root = false;
  std::string root_unit;
};

AttemptState init_attempt(const Proposal& proposal) {
  AttemptState st;
  switch (proposal.kind) {
    case genome::GpKind::kMutation: {
      if (proposal.parent_a == nullptr) {
        throw SearchError("DomainError", "mutation proposal needs a parent");
      }
      st.tree = genome::mutate(*proposal.parent_a, proposal.target_unit,
                               placeholder_node(proposal.root_decl));
      if (!proposal.design_name.empty()) st.tree.design_name = proposal.design_name;
      break;
    }
    case genome::GpKind::kCrossover: {
      if (proposal.parent_a == nullptr || proposal.parent_b == nullptr) {
        throw SearchError("DomainError", "crossover proposal needs two parents");
      }
      genome::CrossoverPlan plan;
      plan.design_name = proposal.design_name;
      plan.root = proposal.root_decl;
      plan.grafts = proposal.grafts;
      st.tree = genome::crossover(*proposal.parent_a, *proposal.parent_b, plan);
      st.force_reuse_root = true;
      break;
    }
    case genome::GpKind::kScratch: {
      st.tree = genome::scratch(proposal.root_decl);
      if (!proposal.design_name.empty()) st.tree.design_name = proposal.design_name;
      break;
    }
  }
  st.root_unit = proposal.root_decl.name;
  st.frontier.push_back(proposal.root_decl.name);
  st.remaining_new = std::max(0, proposal.plan_units - 1);
  return st;
}

}  // namespace

ImplementResult implement(const Proposal& proposal, Generator& generator,
                          const CheckerFn& accept_unit, const CheckerFn& accept_final,
                          const SearchConfig& cfg, Rng& rng) {
  ImplementResult out;
  SearchTrace& trace = out.trace;

  for (int attempt = 1; attempt <= cfg.k_attempts; ++attempt) {
    trace.attempts_used = attempt;
    AttemptState st = init_attempt(proposal);
    size_t unit_index = 0;
    bool attempt_ok = true;

    while (!st.frontier.empty()) {
      const std::string unit_name = st.frontier.front();
      st.frontier.pop_front();

      StepRecord rec;
      rec.unit = unit_name;
      bool accepted = false;

      for (int attempt_try = 0; attempt_try < cfg.k_fails; ++attempt_try) {
        UnitContext ctx;
        ctx.current_tree = &st.tree;
        const tree::UnitNode* slot = tree::find_unit(st.tree, unit_name);
        ctx.decl = slot->decl;
        ctx.unit_index = unit_index;
        ctx.force_reuse = st.force_reuse_root && unit_name == st.root_unit && !slot->children.empty();
        if (ctx.force_reuse) {
          for (const auto& child : slot->children) ctx.reuse_pool.push_back(&child);
        }
        ctx.remaining_units = ctx.force_reuse ? 0 : st.remaining_new;

        Candidate candidate = generator.draw(ctx, rng);
        ++trace.generator_calls;
        trace.token_cost += candidate.cost;
        ++rec.attempts;
        rec.cost += candidate.cost;

        tree::UnitTree trial = st.tree;  // revert point: the pre-attempt tree stays intact
        tree::UnitNode* node = tree::find_unit(trial, unit_name);
        node->body = candidate.body;
        for (const auto& decl : candidate.new_children) {
          node->children.push_back(placeholder_node(decl));
        }
        if (!tree::structural_problems(trial).empty()) continue;
        if (!accept_unit(trial)) continue;
        if (cfg.observer_enabled && candidate.observer_score < cfg.observer_threshold) continue;

        st.tree = std::move(trial);
        st.remaining_new -= static_cast<int>(candidate.new_children.size());
        for (const auto& decl : candidate.new_children) st.frontier.push_back(decl.name);
        generator.learn(candidate.body);
        accepted = true;
        break;
      }

      rec.accepted = accepted;
      trace.steps.push_back(rec);
      ++unit_index;
      if (!accepted) {
        attempt_ok = false;
        break;
      }
    }

    if (attempt_ok && accept_final(st.tree)) {
      trace.status = "success";
      out.result = std::move(st.tree);
      return out;
    }
  }

  trace.status = "unimplementable";
  return out;
}

ImplementResult direct_generate(const Proposal& proposal, Generator& generator,
                                const CheckerFn& accept, int max_retries, Rng& rng) {
  ImplementResult out;
  SearchTrace& trace = out.trace;

  for (int attempt = 1; attempt <= max_retries; ++attempt) {
    trace.attempts_used = attempt;
    ++trace.generator_calls;  // one whole-design call per retry

    AttemptState st = init_attempt(proposal);
    size_t unit_index = 0;
    while (!st.frontier.empty()) {
      const std::string unit_name = st.frontier.front();
      st.frontier.pop_front();

      UnitContext ctx;
      ctx.current_tree = &st.tree;
      const tree::UnitNode* slot = tree::find_unit(st.tree, unit_name);
      ctx.decl = slot->decl;
      ctx.unit_index = unit_index;
      ctx.force_reuse = st.force_reuse_root && unit_name == st.root_unit && !slot->children.empty();
      if (ctx.force_reuse) {
        for (const auto& child : slot->children) ctx.reuse_pool.push_back(&child);
      }
      ctx.remaining_units = ctx.force_reuse ? 0 : st.remaining_new;

      Candidate candidate = generator.draw(ctx, rng);
      trace.token_cost += candidate.cost;
      tree::UnitNode* node = tree::find_unit(st.tree, unit_name);
      node->body = candidate.body;
      for (const auto& decl : candidate.new_children) {
        node->children.push_back(placeholder_node(decl));
        st.frontier.push_back(decl.name);
      }
      st.remaining_new -= static_cast<int>(candidate.new_children.size());
      ++unit_index;
    }

    if (tree::structural_problems(st.tree).empty() && accept(st.tree)) {
      trace.status = "success";
      out.result = std::move(st.tree);
      return out;
    }
  }

  trace.status = "retries_exhausted";
  return out;
}

}  // namespace evolab::search
