// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "evolab/mc.hpp"

namespace evolab::mc {

namespace {

// Generous cap so a pathological p never overflows downstream sums.
constexpr uint64_t kMaxAttempts = 1ull << 40;

// Inverse-transform geometric draw: O(1) per trial regardless of p.
uint64_t geometric_calls(Rng& rng, double p) {
  if (p >= 1.0) return 1;
  const double u = 1.0 - rng.uniform01();  // (0, 1]
  const double failures = std::floor(std::log(u) / std::log1p(-p));
  if (!(failures >= 0.0) || failures >= static_cast<double>(kMaxAttempts)) return kMaxAttempts;
  return 1 + static_cast<uint64_t>(failures);
}

struct Trial {
  uint64_t calls;
  double cost;
};

template <typename Fn>
Summary run_trials(uint64_t trials, uint64_t seed, Exec exec, const Fn& one_trial) {
  std::vector<Trial> results(trials);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(trials); ++i) {
      Rng rng = derive_rng(seed, {static_cast<uint64_t>(i)});
      results[static_cast<size_t>(i)] = one_trial(rng);
    }
  } else {
    for (uint64_t i = 0; i < trials; ++i) {
      Rng rng = derive_rng(seed, {i});
      results[static_cast<size_t>(i)] = one_trial(rng);
    }
  }

  // Serial reduction in index order keeps both variants bit-identical.
  Summary s;
  s.trials = trials;
  double sum_calls = 0.0, sum_cost = 0.0;
  for (const Trial& t : results) {
    sum_calls += static_cast<double>(t.calls);
    sum_cost += t.cost;
  }
  s.mean_calls = sum_calls / static_cast<double>(trials);
  s.mean_cost = sum_cost / static_cast<double>(trials);
  double var_calls = 0.0, var_cost = 0.0;
  for (const Trial& t : results) {
    const double dc = static_cast<double>(t.calls) - s.mean_calls;
    const double dk = t.cost - s.mean_cost;
    var_calls += dc * dc;
    var_cost += dk * dk;
  }
  if (trials > 1) {
    var_calls /= static_cast<double>(trials - 1);
    var_cost /= static_cast<double>(trials - 1);
    s.stderr_calls = std::sqrt(var_calls / static_cast<double>(trials));
    s.stderr_cost = std::sqrt(var_cost / static_cast<double>(trials));
  }
  return s;
}

}  // namespace

Summary simulate_direct(const search::GeneratorModel& model, uint64_t trials, uint64_t seed,
                        Exec exec) {
  const double p = model.p_valid();
  if (p <= 0.0) throw search::SearchError("DomainError", "p_valid must be positive");
  const double cost_full = model.full_attempt_cost();
  return run_trials(trials, seed, exec, [&](Rng& rng) {
    const uint64_t calls = geometric_calls(rng, p);
    return Trial{calls, static_cast<double>(calls) * cost_full};
  });
}

Summary simulate_vs(const search::GeneratorModel& model, uint64_t trials, uint64_t seed,
                    Exec exec) {
  for (const auto& s : model.steps) {
    if (s.success_prob <= 0.0) throw search::SearchError("DomainError", "p_k must be positive");
  }
  return run_trials(trials, seed, exec, [&](Rng& rng) {
    uint64_t calls = 0;
    double cost = 0.0;
    for (size_t k = 0; k < model.steps.size(); ++k) {
      const uint64_t step_calls = geometric_calls(rng, model.steps[k].success_prob);
      calls += step_calls;
      cost += static_cast<double>(step_calls) * model.attempt_cost(k);
    }
    return Trial{calls, cost};
  });
}

}  // namespace evolab::mc
