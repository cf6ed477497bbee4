// SPDX-License-Identifier: Apache-2.0
#pragma once

// Population-fitness time series over sliding windows and the derived
// progress metrics (end/peak improvement, volatility, Sharpe ratio, maximum
// drawdown), plus the paired Wilcoxon signed-rank test used by the ablation
// comparison.

#include <optional>
#include <string>
#include <vector>

#include "evolab/errors.hpp"
#include "evolab/store.hpp"

namespace evolab::metrics {

class MetricsError : public Error {
 public:
  using Error::Error;
};

struct GenerationSeries {
  std::vector<double> means;  // m_0 .. m_G
  int population_size = 50;   // S_P
  int step = 25;              // k_s
};

/// Window g covers designs [g*k_s, g*k_s + S_P) of the verification-ordered
/// fitness sequence; only complete windows count. Raises InsufficientDesigns.
GenerationSeries generation_series(const std::vector<double>& fitness_in_order, int s_p = 50,
                                   int k_s = 25);

/// Final fitness of every verified design, ordered by the sequence number of
/// its first recorded verification.
std::vector<double> fitness_by_verification_order(const store::EvoStore& store);

struct MetricSet {
  double delta = 0.0;      // m_G - m_0
  double delta_max = 0.0;  // max_g m_g - m_0
  double mdd = 0.0;        // min_h (m_h - max_{g<=h} m_g), always <= 0
  std::optional<double> volatility;  // sample std of generational differences
  std::optional<double> sharpe;      // mean(diffs) / std(diffs)
};

/// Volatility and Sharpe need at least two generational differences and a
/// nonzero std; they stay unset otherwise. Raises DegenerateSeries on an
/// empty series.
MetricSet compute_metrics(const std::vector<double>& means);

/// Like compute_metrics().sharpe but raising DegenerateSeries when undefined.
double sharpe_strict(const std::vector<double>& means);

std::string series_csv(const GenerationSeries& series);  // "window,mean_fitness"

struct WilcoxonResult {
  double w_plus = 0.0;
  int n = 0;  // pairs with nonzero difference
  double p_value = 1.0;
  bool exact = false;
};

/// One-sided paired test of H1: median(x - y) > 0. Zero differences are
/// dropped; tied |d| get midranks. Exact sign-enumeration DP up to n = 30,
/// normal approximation with tie correction beyond.
WilcoxonResult wilcoxon_signed_rank_greater(const std::vector<double>& x,
                                            const std::vector<double>& y);

}  // namespace evolab::metrics
