// SPDX-License-Identifier: Apache-2.0
#pragma once

// Validity pipeline for block designs: static checks (parser, formatter)
// followed by execution checks (initialization, forward, backward, causality,
// differentiability, effectiveness), in that order. A static failure skips
// every execution check; an execution failure skips the remaining ones.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evolab/dsl.hpp"
#include "evolab/rng.hpp"
#include "evolab/unit_tree.hpp"

namespace evolab::checker {

enum class CheckId {
  kParser,
  kFormatter,
  kInitialization,
  kForward,
  kBackward,
  kCausality,
  kDifferentiability,
  kEffectiveness,
};
constexpr int kCheckCount = 8;
const char* check_name(CheckId id);

enum class Outcome { kPass, kFail, kSkipped };

struct CheckResult {
  CheckId id = CheckId::kParser;
  Outcome outcome = Outcome::kSkipped;
  std::string witness;  // empty on pass
};

struct CheckReport {
  std::vector<CheckResult> results;  // all eight checks, pipeline order

  bool overall_pass() const;
  bool static_failure() const;
  const CheckResult& result(CheckId id) const;
  /// 0 pass, 2 static failure, 3 execution failure.
  int exit_code() const;
  /// JSON with stable field order.
  std::string to_json() const;
};

/// Toy training task used by the effectiveness check: next-token copy over a
/// one-hot embedding, mean cross-entropy on positions >= 1, plain gradient
/// descent.
struct EffectivenessConfig {
  int vocab_size = 16;  // equals the embedding width D of the task
  int64_t seq_len = 16;
  int64_t batch = 4;
  int steps = 10;
  double learning_rate = 0.05;
  double flop_ratio_bound = 5.0;
  double gradient_norm_bound = 1e4;
  double loss_explode_bound = 1e4;
  std::optional<dsl::Program> reference;  // flop-ratio baseline
};

/// Reference block for the flop-ratio gate: a plain pre-norm
/// mixer + gated MLP, the shape of the stock transformer baseline.
dsl::Program reference_program();

struct CheckerConfig {
  int64_t probe_b = 2;
  int64_t probe_l = 8;
  int64_t probe_d = 4;
  int causality_probes = 2;
  double causality_tol = 1e-9;
  int differentiability_probes = 3;
  bool run_effectiveness = true;  // staged search disables this for partial trees
  EffectivenessConfig effectiveness;
};

CheckerConfig default_checker_config();

/// Static protocol check: every declared child is invoked by its parent's
/// body and every invoked child is declared (plus tree-level structural
/// sanity). Failures name the offending unit.
CheckResult check_format(const tree::UnitTree& tree);

/// Perturbs X at positions >= t and requires outputs at positions < t to be
/// unchanged within `tol`, for every split point and `probes` random draws.
CheckResult check_causality(const dsl::Program& program, int probes, Rng& rng, int64_t b,
                            int64_t l, int64_t d, double tol);

/// Gradients must be finite, and every parameter must receive a nonzero
/// gradient on at least one of `probes` independent draws.
CheckResult check_differentiability(const dsl::Program& program, int probes, Rng& rng, int64_t b,
                                    int64_t l, int64_t d);

/// Runs the toy copy task. Pass requires: flop ratio within bound, every
/// step's gradient norm within bound, loss finite and inside bounds, and a
/// final loss strictly below the initial one.
CheckResult check_effectiveness(const dsl::Program& program, const EffectivenessConfig& cfg,
                                Rng& rng);

/// Full pipeline with short-circuiting, deterministic in `seed`.
CheckReport run_all(const tree::UnitTree& tree, const CheckerConfig& cfg, uint64_t seed);

}  // namespace evolab::checker
