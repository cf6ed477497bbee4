// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <sstream>

#include "evolab/metrics.hpp"

namespace evolab::metrics {

GenerationSeries generation_series(const std::vector<double>& fitness_in_order, int s_p, int k_s) {
  if (s_p < 1 || k_s < 1) throw MetricsError("DomainError", "window and step must be positive");
  const int n = static_cast<int>(fitness_in_order.size());
  if (n < s_p) {
    throw MetricsError("InsufficientDesigns", "need at least " + std::to_string(s_p) +
                                                  " verified designs, have " + std::to_string(n));
  }
  GenerationSeries out;
  out.population_size = s_p;
  out.step = k_s;
  for (int start = 0; start + s_p <= n; start += k_s) {
    double sum = 0.0;
    for (int i = start; i < start + s_p; ++i) sum += fitness_in_order[static_cast<size_t>(i)];
    out.means.push_back(sum / static_cast<double>(s_p));
  }
  return out;
}

std::vector<double> fitness_by_verification_order(const store::EvoStore& store) {
  std::vector<std::pair<uint64_t, double>> ordered;
  for (const auto& rec : store.all_records()) {
    if (rec.first_verified_seq == 0) continue;
    double sum = 0.0;
    int n = 0;
    for (const auto& [scale, tasks] : rec.results) {
      for (const auto& [task, score] : tasks) {
        sum += score;
        ++n;
      }
    }
    if (n > 0) ordered.emplace_back(rec.first_verified_seq, sum / static_cast<double>(n));
  }
  std::sort(ordered.begin(), ordered.end());
  std::vector<double> out;
  out.reserve(ordered.size());
  for (const auto& [seq, f] : ordered) out.push_back(f);
  return out;
}

MetricSet compute_metrics(const std::vector<double>& means) {
  if (means.empty()) throw MetricsError("DegenerateSeries", "series is empty");
  MetricSet m;
  m.delta = means.back() - means.front();
  double peak = means.front();
  double running_max = means.front();
  double mdd = 0.0;
  for (double v : means) {
    peak = std::max(peak, v);
    running_max = std::max(running_max, v);
    mdd = std::min(mdd, v - running_max);
  }
  m.delta_max = peak - means.front();
  m.mdd = mdd;

  if (means.size() >= 3) {  // at least two generational differences
    std::vector<double> diffs;
    for (size_t i = 1; i < means.size(); ++i) diffs.push_back(means[i] - means[i - 1]);
    double mean_diff = 0.0;
    for (double d : diffs) mean_diff += d;
    mean_diff /= static_cast<double>(diffs.size());
    double var = 0.0;
    for (double d : diffs) var += (d - mean_diff) * (d - mean_diff);
    var /= static_cast<double>(diffs.size() - 1);
    const double std_dev = std::sqrt(var);
    m.volatility = std_dev;
    if (std_dev > 0.0) m.sharpe = mean_diff / std_dev;
  }
  return m;
}

double sharpe_strict(const std::vector<double>& means) {
  const MetricSet m = compute_metrics(means);
  if (!m.sharpe.has_value()) {
    throw MetricsError("DegenerateSeries",
                       "Sharpe ratio undefined: fewer than two differences or zero volatility");
  }
  return *m.sharpe;
}

std::string series_csv(const GenerationSeries& series) {
  std::ostringstream out;
  out << "window,mean_fitness\n";
  for (size_t i = 0; i < series.means.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", series.means[i]);
    out << i << ',' << buf << "\n";
  }
  return out.str();
}

WilcoxonResult wilcoxon_signed_rank_greater(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  if (x.size() != y.size()) throw MetricsError("DomainError", "paired samples differ in length");
  std::vector<double> diffs;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult out;
  out.n = static_cast<int>(diffs.size());
  if (diffs.empty()) return out;  // no evidence either way: p = 1

  // Midranks over |d|, doubled so tied ranks stay integral.
  std::vector<size_t> idx(diffs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  std::vector<int64_t> doubled_rank(diffs.size(), 0);
  std::vector<int64_t> tie_sizes;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && std::abs(diffs[idx[j]]) == std::abs(diffs[idx[i]])) ++j;
    const int64_t doubled_mid = static_cast<int64_t>(i + 1 + j) ;  // 2 * (i+1 + j) / 2
    for (size_t k = i; k < j; ++k) doubled_rank[idx[k]] = doubled_mid;
    tie_sizes.push_back(static_cast<int64_t>(j - i));
    i = j;
  }

  int64_t doubled_w_plus = 0;
  for (size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) doubled_w_plus += doubled_rank[i];
  }
  out.w_plus = static_cast<double>(doubled_w_plus) / 2.0;

  const int n = out.n;
  if (n <= 30) {
    // Exact: count sign assignments with doubled rank sum >= observed.
    int64_t total = 0;
    for (size_t i = 0; i < diffs.size(); ++i) total += doubled_rank[i];
    std::vector<double> count(static_cast<size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (size_t i = 0; i < diffs.size(); ++i) {
      const int64_t r = doubled_rank[i];
      for (int64_t s = total; s >= r; --s) {
        count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - r)];
      }
    }
    double ge = 0.0, all = 0.0;
    for (int64_t s = 0; s <= total; ++s) {
      all += count[static_cast<size_t>(s)];
      if (s >= doubled_w_plus) ge += count[static_cast<size_t>(s)];
    }
    out.p_value = ge / all;
    out.exact = true;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double tie_term = 0.0;
  for (int64_t t : tie_sizes) {
    tie_term += static_cast<double>(t * t * t - t);
  }
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (out.w_plus - mean - 0.5) / std::sqrt(var);
  out.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  out.exact = false;
  return out;
}

}  // namespace evolab::metrics
