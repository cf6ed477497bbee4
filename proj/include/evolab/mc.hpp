// SPDX-License-Identifier: Apache-2.0
#pragma once

// Monte Carlo estimators for the generator model. Every kernel exists in two
// variants: a serial reference and an OpenMP-parallel version. Trials draw
// their RNG from (seed, trial index), per-trial results land in preallocated
// arrays, and the reduction runs serially in index order, so both variants
// produce bit-identical summaries at any thread count.

#include <cstdint>

#include "evolab/search.hpp"

namespace evolab::mc {

enum class Exec { kSerial, kParallel };

struct Summary {
  uint64_t trials = 0;
  double mean_calls = 0.0;
  double mean_cost = 0.0;
  double stderr_calls = 0.0;
  double stderr_cost = 0.0;
};

/// Single-shot generation: geometric number of whole-design attempts with
/// success probability prod p_k; every attempt costs full_attempt_cost().
Summary simulate_direct(const search::GeneratorModel& model, uint64_t trials, uint64_t seed,
                        Exec exec = Exec::kParallel);

/// Viterbi-style generation: per-step geometric retries at p_k, each attempt
/// at step k costing attempt_cost(k).
Summary simulate_vs(const search::GeneratorModel& model, uint64_t trials, uint64_t seed,
                    Exec exec = Exec::kParallel);

}  // namespace evolab::mc
