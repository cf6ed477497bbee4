// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "evolab/scheduler.hpp"

namespace evolab::sched {

namespace {

// Sort key placing unverified designs below every verified one.
struct FitKey {
  bool verified;
  double value;

  bool operator<(const FitKey& o) const {
    if (verified != o.verified) return !verified;
    return value < o.value;
  }
  bool operator>=(const FitKey& o) const { return !(*this < o); }
  bool operator==(const FitKey& o) const { return verified == o.verified && value == o.value; }
};

FitKey fit_key(const DesignView& d) {
  return FitKey{d.fitness.has_value(), d.fitness.value_or(0.0)};
}

// Upper-quantile threshold: the k-th largest key with k = max(1,
// floor(cutoff * n)); membership is key >= threshold, so boundary ties
// classify upward.
template <typename Key>
Key upper_quantile_threshold(std::vector<Key> keys, double cutoff) {
  std::sort(keys.begin(), keys.end());
  const size_t n = keys.size();
  size_t k = static_cast<size_t>(std::floor(cutoff * static_cast<double>(n) + 1e-12));
  k = std::max<size_t>(1, std::min(k, n));
  return keys[n - k];
}

int dense_rank_count(const std::vector<double>& sorted_desc_unique, double value) {
  // 1-based rank of `value` among unique values sorted descending.
  for (size_t i = 0; i < sorted_desc_unique.size(); ++i) {
    if (sorted_desc_unique[i] == value) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(sorted_desc_unique.size());
}

// Orders a pool by the mean of dense fitness and confidence ranks
// (best first); ties break toward higher fitness, then by id.
std::vector<DesignView> rank_pool(std::vector<DesignView> pool) {
  std::vector<double> fit_values, conf_values;
  for (const auto& d : pool) {
    fit_values.push_back(d.fitness.value_or(-1.0));
    conf_values.push_back(static_cast<double>(d.confidence));
  }
  auto unique_desc = [](std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const std::vector<double> fit_ranks = unique_desc(fit_values);
  const std::vector<double> conf_ranks = unique_desc(conf_values);

  std::vector<std::pair<double, size_t>> keyed;
  for (size_t i = 0; i < pool.size(); ++i) {
    const double rf = dense_rank_count(fit_ranks, pool[i].fitness.value_or(-1.0));
    const double rc = dense_rank_count(conf_ranks, static_cast<double>(pool[i].confidence));
    keyed.emplace_back((rf + rc) / 2.0, i);
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    const FitKey fa = fit_key(pool[a.second]), fb = fit_key(pool[b.second]);
    if (!(fa == fb)) return fb < fa;
    return pool[a.second].id < pool[b.second].id;
  });
  std::vector<DesignView> out;
  out.reserve(pool.size());
  for (const auto& [key, idx] : keyed) out.push_back(pool[idx]);
  return out;
}

}  // namespace

Quadrants quadrant_partition(const std::vector<DesignView>& designs, double fitness_cutoff,
                             double confidence_cutoff) {
  if (designs.empty()) throw SchedError("EmptyPopulation", "no designs to partition");

  std::vector<FitKey> fit_keys;
  std::vector<int> conf_keys;
  for (const auto& d : designs) {
    fit_keys.push_back(fit_key(d));
    conf_keys.push_back(d.confidence);
  }
  const FitKey fit_threshold = upper_quantile_threshold(fit_keys, fitness_cutoff);
  const int conf_threshold = upper_quantile_threshold(conf_keys, confidence_cutoff);

  Quadrants q;
  for (const auto& d : designs) {
    const bool good = fit_key(d) >= fit_threshold;
    const bool confident = d.confidence >= conf_threshold;
    if (good && confident) {
      q.q1.push_back(d);
    } else if (good) {
      q.q2.push_back(d);
    } else if (confident) {
      q.q3.push_back(d);
    } else {
      q.q4.push_back(d);
    }
  }
  return q;
}

double restart_probability(int round, double p_rs, int k_rs) {
  if (round <= 0) return 1.0;
  if (round >= k_rs) return p_rs;
  return 1.0 + (p_rs - 1.0) * static_cast<double>(round) / static_cast<double>(k_rs);
}

std::vector<Selected> select_designs(const std::vector<DesignView>& population, Mode mode,
                                     const SelectionConfig& cfg, int round, Rng& rng, int count) {
  if (population.empty()) throw SchedError("EmptyPopulation", "no designs to select from");

  std::set<std::string> chosen;
  std::vector<Selected> out;

  auto pick_uniform = [&](const std::vector<DesignView>& pool) -> std::optional<DesignView> {
    std::vector<const DesignView*> open;
    for (const auto& d : pool) {
      if (!chosen.count(d.id)) open.push_back(&d);
    }
    if (open.empty()) return std::nullopt;
    return *open[rng.below(open.size())];
  };

  if (cfg.uniform_random) {
    for (int i = 0; i < count; ++i) {
      const auto pick = pick_uniform(population);
      if (!pick.has_value()) break;
      chosen.insert(pick->id);
      out.push_back({pick->id, "uniform_random"});
    }
    if (out.empty()) throw SchedError("EmptyPopulation", "population exhausted");
    return out;
  }

  // One explore decision per call, as in the quadrant-selection routine.
  const bool explore = rng.bernoulli(cfg.p_explore);
  Quadrants q = quadrant_partition(population, cfg.fitness_cutoff, cfg.confidence_cutoff);
  const std::vector<DesignView>& primary =
      mode == Mode::kDesign ? (explore ? q.q3 : q.q1) : (explore ? q.q4 : q.q2);
  const std::vector<DesignView>& secondary =
      mode == Mode::kDesign ? (explore ? q.q1 : q.q3) : (explore ? q.q2 : q.q4);

  std::vector<DesignView> pool = primary.empty() ? secondary : primary;
  if (pool.empty()) pool = population;
  pool = rank_pool(std::move(pool));
  std::vector<DesignView> ranked_all = rank_pool(population);

  const size_t top_k = static_cast<size_t>(std::max(1, cfg.top_k));

  auto next_ranked = [&](const std::vector<DesignView>& ranked) -> std::optional<DesignView> {
    for (const auto& d : ranked) {
      if (!chosen.count(d.id)) return d;
    }
    return std::nullopt;
  };

  for (int i = 0; i < count; ++i) {
    // Random-start branch: revisit a seed drawn from the seed distribution.
    if (rng.uniform01() < restart_probability(round, cfg.restart_floor, cfg.restart_anneal_rounds)) {
      std::vector<const DesignView*> seeds;
      double mass = 0.0;
      for (const auto& d : population) {
        if (d.is_seed && !chosen.count(d.id)) {
          seeds.push_back(&d);
          auto it = cfg.seed_distribution.find(d.id);
          mass += it == cfg.seed_distribution.end() ? 0.0 : it->second;
        }
      }
      if (!seeds.empty()) {
        const DesignView* pick = nullptr;
        if (mass > 0.0) {
          double r = rng.uniform01() * mass;
          for (const auto* s : seeds) {
            auto it = cfg.seed_distribution.find(s->id);
            const double w = it == cfg.seed_distribution.end() ? 0.0 : it->second;
            if (w <= 0.0) continue;
            if (r < w || s == seeds.back()) {
              pick = s;
              break;
            }
            r -= w;
          }
        }
        if (pick == nullptr) pick = seeds[rng.below(seeds.size())];
        chosen.insert(pick->id);
        out.push_back({pick->id, "restart"});
        continue;
      }
    }

    std::optional<DesignView> pick;
    std::string branch = explore ? "explore" : "exploit";
    if (rng.uniform01() < cfg.top_k_noise && pool.size() > top_k) {
      const std::vector<DesignView> outside(pool.begin() + static_cast<int64_t>(top_k), pool.end());
      pick = pick_uniform(outside);
      if (pick.has_value()) branch = "noise";
    }
    if (!pick.has_value()) pick = next_ranked(pool);
    if (!pick.has_value()) pick = next_ranked(ranked_all);
    if (!pick.has_value()) break;
    chosen.insert(pick->id);
    out.push_back({pick->id, branch});
  }

  if (out.empty()) throw SchedError("EmptyPopulation", "population exhausted");
  return out;
}

// ---------------------------------------------------------------------------
// Ladder of Scales
// ---------------------------------------------------------------------------

namespace {

void validate_totals(const std::vector<ScaleBudget>& totals) {
  if (totals.empty()) throw SchedError("MisorderedScales", "no scales configured");
  for (size_t i = 0; i < totals.size(); ++i) {
    if (totals[i].total <= 0) throw SchedError("MisorderedScales", "totals must be positive");
    if (i > 0 && totals[i].total >= totals[i - 1].total) {
      throw SchedError("MisorderedScales", "totals must strictly decrease with scale");
    }
  }
}

int used_at(const std::map<std::string, int>& used, const std::string& scale) {
  auto it = used.find(scale);
  return it == used.end() ? 0 : it->second;
}

}  // namespace

std::map<std::string, int> assign_los_budgets(const std::map<std::string, int>& used,
                                              const std::vector<ScaleBudget>& totals) {
  validate_totals(totals);
  std::map<std::string, int> available;

  const ScaleBudget& lowest = totals.front();
  int64_t los = used_at(used, lowest.scale);
  available[lowest.scale] = los < lowest.total ? 1 : 0;

  for (size_t i = 0; i + 1 < totals.size(); ++i) {
    const ScaleBudget& curr = totals[i];
    const ScaleBudget& next = totals[i + 1];
    // floor(loS[curr] * selectRatio) in exact integer arithmetic.
    los = (los * next.total) / curr.total;
    if (los > next.total) {
      available[next.scale] = 0;
    } else {
      available[next.scale] =
          static_cast<int>(std::max<int64_t>(0, los - used_at(used, next.scale)));
    }
  }
  return available;
}

std::optional<std::string> select_scale(const std::set<std::string>& verified_scales,
                                        const std::map<std::string, int>& used,
                                        const std::vector<ScaleBudget>& totals) {
  const auto available = assign_los_budgets(used, totals);
  for (const auto& rung : totals) {
    if (verified_scales.count(rung.scale)) continue;
    if (available.at(rung.scale) > 0) return rung.scale;
  }
  return std::nullopt;
}

LadderController::LadderController(std::vector<ScaleBudget> totals) : totals_(std::move(totals)) {
  validate_totals(totals_);
}

std::map<std::string, int> LadderController::effective_used_locked() const {
  std::map<std::string, int> used = committed_;
  for (const auto& [scale, n] : reserved_) used[scale] += n;
  return used;
}

std::optional<std::string> LadderController::try_acquire(
    const std::set<std::string>& verified_scales) {
  std::lock_guard lock(mutex_);
  const auto scale = sched::select_scale(verified_scales, effective_used_locked(), totals_);
  if (scale.has_value()) ++reserved_[*scale];
  return scale;
}

void LadderController::commit(const std::string& scale) {
  std::lock_guard lock(mutex_);
  if (--reserved_[scale] < 0) throw SchedError("BadReservation", "commit without reserve");
  ++committed_[scale];
}

void LadderController::abort(const std::string& scale) {
  std::lock_guard lock(mutex_);
  if (--reserved_[scale] < 0) throw SchedError("BadReservation", "abort without reserve");
}

std::map<std::string, int> LadderController::available() const {
  std::lock_guard lock(mutex_);
  return assign_los_budgets(effective_used_locked(), totals_);
}

std::map<std::string, int> LadderController::committed() const {
  std::lock_guard lock(mutex_);
  return committed_;
}

}  // namespace evolab::sched
