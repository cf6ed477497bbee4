// SPDX-License-Identifier: Apache-2.0
#pragma once

// Viterbi-style staged implementation harness with pluggable candidate
// generators, the direct single-shot baseline, and the analytic calculators
// for expected calls, token cost, yield and pipeline throughput.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evolab/genome.hpp"
#include "evolab/rng.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::search {

class SearchError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Generator model and analytic calculators
// ---------------------------------------------------------------------------

struct StepModel {
  double success_prob = 0.8;        // p_k
  double history_tokens = 2000.0;   // H_k
  double instruction_tokens = 500.0;  // delta_k
  double output_tokens = 800.0;     // O_k
};

struct GeneratorModel {
  std::vector<StepModel> steps;
  double input_cost = 1.0;   // c_i
  double output_cost = 3.0;  // c_o
  double quality_lo = 2.0;   // proposal/observer quality draws ~ U(lo, hi)
  double quality_hi = 5.0;

  const StepModel& step(size_t k) const {
    return steps[k < steps.size() ? k : steps.size() - 1];
  }
  double attempt_cost(size_t k) const {
    const StepModel& s = step(k);
    return input_cost * (s.history_tokens + s.instruction_tokens) + output_cost * s.output_tokens;
  }
  /// One direct attempt regenerates everything: shared history, all
  /// instructions, the full output.
  double full_attempt_cost() const {
    double instr = 0.0, out = 0.0;
    for (const auto& s : steps) {
      instr += s.instruction_tokens;
      out += s.output_tokens;
    }
    const double history = steps.empty() ? 0.0 : steps.front().history_tokens;
    return input_cost * (history + instr) + output_cost * out;
  }
  double p_valid() const {
    double p = 1.0;
    for (const auto& s : steps) p *= s.success_prob;
    return p;
  }
};

GeneratorModel uniform_model(double p, int n);

/// 1 / p_valid. DomainError for p <= 0.
double expected_calls_direct(double p_valid);
/// Sum of 1 / p_k.
double expected_calls_vs(const std::vector<double>& step_probs);
double expected_calls_vs(const GeneratorModel& model);
/// Sum over steps of (1 / p_k) * (c_i (H_k + delta_k) + c_o O_k).
double expected_cost_vs(const GeneratorModel& model);
/// full_attempt_cost / prod p_k.
double expected_cost_direct(const GeneratorModel& model);

/// Expected yield Y = Q * E * B / c.
double yield_rate(double q, double e, double c, double b);

struct Throughput {
  double theta;   // verified designs per unit time: min(N_D/T_D, N_V/T_V)
  double r_star;  // optimal verifier/designer ratio: T_V / T_D
};
Throughput throughput(double n_d, double n_v, double t_d, double t_v);

/// T_D inflated by the verification-time error rate: t_d_bar / (1 - err).
double design_time_with_errors(double t_d_bar, double err);

/// Expected seconds per verification job: per-scale times weighted by the
/// cumulative selection ratios, normalized over jobs.
double expected_verify_seconds(const std::vector<double>& per_scale_seconds,
                               const std::vector<double>& select_ratios);

struct VsGapRow {
  int n;
  double analytic_direct;
  double analytic_vs;
  double empirical_direct;
  double empirical_vs;
  double ratio;  // analytic_direct / analytic_vs
};

/// Analytic and Monte Carlo columns for N = 1..n_max at uniform per-step
/// probability p. `parallel` selects the OpenMP kernel; results are identical
/// either way.
std::vector<VsGapRow> simulate_vs_gap(double p, int n_max, uint64_t trials, uint64_t seed,
                                      bool parallel = true);
std::string vs_gap_csv(const std::vector<VsGapRow>& rows);

// ---------------------------------------------------------------------------
// Live candidate generation
// ---------------------------------------------------------------------------

struct UnitContext {
  const tree::UnitTree* current_tree = nullptr;
  tree::UnitDecl decl;                                 // unit being implemented
  size_t unit_index = 0;                               // step number within this run
  int remaining_units = 0;                             // budget for declaring new children
  std::vector<const tree::UnitNode*> reuse_pool;       // crossover grafts to wire up
  bool force_reuse = false;
};

struct Candidate {
  std::string body;
  std::vector<tree::UnitDecl> new_children;  // implemented later (placeholders for now)
  double observer_score = 5.0;
  double cost = 0.0;  // token cost of this attempt
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual double propose_quality(Rng& rng) = 0;
  virtual Candidate draw(const UnitContext& ctx, Rng& rng) = 0;
  /// Hook for the seeds-with-memory ablation: accepted fragments feed back
  /// into the template pool.
  virtual void learn(const std::string& body) { (void)body; }
};

/// Stochastic generator: validity is a Bernoulli(p_k) draw; valid draws emit a
/// causal, fully parameterized fragment from the template pool, invalid draws
/// emit a fragment carrying one of the configured defect kinds.
class BernoulliGenerator : public Generator {
 public:
  enum class Defect { kSyntax, kUnbound, kNonCausal, kDanglingParam, kUndeclaredCall };

  struct Options {
    std::vector<Defect> defects = {Defect::kSyntax, Defect::kUnbound, Defect::kNonCausal,
                                   Defect::kDanglingParam, Defect::kUndeclaredCall};
    bool allow_exports = true;
    bool enable_learning = false;  // accepted fragments feed the template pool
  };

  explicit BernoulliGenerator(GeneratorModel model)
      : BernoulliGenerator(std::move(model), Options()) {}
  BernoulliGenerator(GeneratorModel model, Options options);

  double propose_quality(Rng& rng) override;
  Candidate draw(const UnitContext& ctx, Rng& rng) override;
  void learn(const std::string& body) override;

  const GeneratorModel& model() const { return model_; }

 private:
  GeneratorModel model_;
  Options options_;
  std::vector<std::string> learned_;
};

/// Replays a fixed script of candidates; rng is only used for quality draws.
class ScriptedGenerator : public Generator {
 public:
  explicit ScriptedGenerator(std::vector<Candidate> script, double quality = 5.0);

  double propose_quality(Rng&) override { return quality_; }
  Candidate draw(const UnitContext& ctx, Rng& rng) override;

 private:
  std::vector<Candidate> script_;
  size_t next_ = 0;
  double quality_;
};

// ---------------------------------------------------------------------------
// Staged implementation
// ---------------------------------------------------------------------------

struct SearchConfig {
  int k_fails = 5;
  int k_attempts = 5;
  double reviewer_threshold = 4.0;
  double observer_threshold = 3.0;
  bool observer_enabled = true;
  int max_new_units = 5;  // frontier growth budget beyond the initial plan
};

using CheckerFn = std::function<bool(const tree::UnitTree&)>;

struct StepRecord {
  std::string unit;
  int attempts = 0;
  bool accepted = false;
  double cost = 0.0;
};

struct SearchTrace {
  std::vector<StepRecord> steps;
  uint64_t generator_calls = 0;
  double token_cost = 0.0;
  int attempts_used = 0;
  std::string status;  // "success" or "unimplementable"
};

struct Proposal {
  genome::GpKind kind = genome::GpKind::kScratch;
  const tree::UnitTree* parent_a = nullptr;  // mutation + crossover
  const tree::UnitTree* parent_b = nullptr;  // crossover
  std::string target_unit;                   // mutation
  tree::UnitDecl root_decl;                  // scratch / crossover fresh root
  std::vector<genome::SourceRef> grafts;     // crossover reuse set
  std::string design_name;
  int plan_units = 3;  // intended unit count for fresh subtrees
};

struct ImplementResult {
  std::optional<tree::UnitTree> result;
  SearchTrace trace;

  bool success() const { return result.has_value(); }
};

/// Staged construction: pops one unimplemented unit at a time, draws
/// candidates with per-unit retries (k_fails), freezes accepted units, and
/// restarts the whole proposal up to k_attempts times. `accept_unit` runs per
/// candidate; `accept_final` gates the completed tree.
ImplementResult implement(const Proposal& proposal, Generator& generator,
                          const CheckerFn& accept_unit, const CheckerFn& accept_final,
                          const SearchConfig& cfg, Rng& rng);

/// Single-shot baseline: each retry regenerates the whole design; validity
/// requires every unit to come out valid at once.
ImplementResult direct_generate(const Proposal& proposal, Generator& generator,
                                const CheckerFn& accept, int max_retries, Rng& rng);

}  // namespace evolab::search
