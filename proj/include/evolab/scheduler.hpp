// SPDX-License-Identifier: Apache-2.0
#pragma once

// Design selection (quadrants, restart schedule, top-K noise) and the
// Ladder-of-Scales budget controller.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evolab/errors.hpp"
#include "evolab/rng.hpp"

namespace evolab::sched {

class SchedError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct SelectionConfig {
  double fitness_cutoff = 0.25;     // upper-quantile share counted as "good"
  double confidence_cutoff = 0.25;  // upper-quantile share counted as "confident"
  double p_explore = 0.15;
  int top_k = 5;
  double top_k_noise = 0.05;       // alpha
  double restart_floor = 0.05;     // p_rs
  int restart_anneal_rounds = 10;  // K_rs
  std::map<std::string, double> seed_distribution;  // seed id -> probability
  bool uniform_random = false;  // ablation: selection ignores fitness entirely
};

struct DesignView {
  std::string id;
  std::optional<double> fitness;  // unverified designs rank below every verified one
  int confidence = 0;
  bool is_seed = false;
};

struct Quadrants {
  std::vector<DesignView> q1;  // good & confident
  std::vector<DesignView> q2;  // good & not confident
  std::vector<DesignView> q3;  // poor & confident
  std::vector<DesignView> q4;  // poor & not confident
};

/// Partitions by upper quantiles of fitness and confidence; ties at a
/// threshold classify upward. Raises EmptyPopulation.
Quadrants quadrant_partition(const std::vector<DesignView>& designs, double fitness_cutoff,
                             double confidence_cutoff);
inline Quadrants quadrant_partition(const std::vector<DesignView>& designs, double cutoff) {
  return quadrant_partition(designs, cutoff, cutoff);
}

/// Linear schedule: 1 at round 0, down to p_rs at round K_rs, constant after.
double restart_probability(int round, double p_rs, int k_rs);

enum class Mode { kDesign, kVerify };

struct Selected {
  std::string id;
  std::string branch;  // "restart", "exploit", "explore", "noise" or "uniform_random"
};

/// Picks `count` distinct designs for the given mode. Design mode exploits Q1
/// and explores Q3; verify mode exploits Q2 and explores Q4. Within the chosen
/// quadrant, designs are ordered by the mean of their fitness and confidence
/// ranks (dense ranks, ties shared); the i-th pick takes the i-th ranked
/// design, except that with probability alpha it swaps for a uniform pick
/// outside the top-K.
std::vector<Selected> select_designs(const std::vector<DesignView>& population, Mode mode,
                                     const SelectionConfig& cfg, int round, Rng& rng, int count);

inline Selected select_for_design(const std::vector<DesignView>& population,
                                  const SelectionConfig& cfg, int round, Rng& rng) {
  return select_designs(population, Mode::kDesign, cfg, round, rng, 1).front();
}
inline Selected select_for_verify(const std::vector<DesignView>& population,
                                  const SelectionConfig& cfg, int round, Rng& rng) {
  return select_designs(population, Mode::kVerify, cfg, round, rng, 1).front();
}

// ---------------------------------------------------------------------------
// Ladder of Scales
// ---------------------------------------------------------------------------

/// One rung: scale label plus total run budget. Rungs are listed in ascending
/// scale order and must carry strictly decreasing totals.
struct ScaleBudget {
  std::string scale;
  int total = 0;
};

/// Derived availability: the lowest scale replenishes one slot per use until
/// its total is exhausted; each higher rung is released as
/// floor(loS[curr] * total[next] / total[curr]) minus what it already used.
/// Raises MisorderedScales.
std::map<std::string, int> assign_los_budgets(const std::map<std::string, int>& used,
                                              const std::vector<ScaleBudget>& totals);

/// Lowest scale that is available under `used` and absent from
/// `verified_scales`; nullopt when none qualifies.
std::optional<std::string> select_scale(const std::set<std::string>& verified_scales,
                                        const std::map<std::string, int>& used,
                                        const std::vector<ScaleBudget>& totals);

/// Thread-safe reservation ledger over the ladder policy: in-flight
/// reservations count against availability, so two verifiers cannot consume a
/// scale's last slot twice.
class LadderController {
 public:
  explicit LadderController(std::vector<ScaleBudget> totals);

  /// Atomically picks the lowest available unverified scale and reserves it.
  std::optional<std::string> try_acquire(const std::set<std::string>& verified_scales);
  void commit(const std::string& scale);  // reservation became a recorded use
  void abort(const std::string& scale);   // reservation released without use

  std::map<std::string, int> available() const;
  std::map<std::string, int> committed() const;
  const std::vector<ScaleBudget>& totals() const { return totals_; }

 private:
  std::map<std::string, int> effective_used_locked() const;

  std::vector<ScaleBudget> totals_;
  mutable std::mutex mutex_;
  std::map<std::string, int> reserved_;
  std::map<std::string, int> committed_;
};

}  // namespace evolab::sched
