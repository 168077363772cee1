#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

/// Largest tie-free sample size using the exact null distribution.
inline constexpr std::size_t kKendallExactMax = 33;

struct RankCorrelationResult {
  double tau = std::numeric_limits<double>::quiet_NaN();  // tau-b
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  bool exact = false;
  bool defined = false;  // false when either side is constant
};

namespace detail {

/// P(|S| >= |s_obs|) for S = concordant - discordant over uniformly random
/// permutations of n distinct values, via the distribution of inversion counts.
inline double kendall_exact_p(std::size_t n, long long discordant) {
  const long long pairs = static_cast<long long>(n * (n - 1) / 2);
  std::vector<double> dist{1.0};
  for (std::size_t k = 2; k <= n; ++k) {
    // Inserting element k adds 0..k-1 inversions with equal probability.
    std::vector<double> next(dist.size() + k - 1, 0.0);
    double window = 0.0;
    for (std::size_t s = 0; s < next.size(); ++s) {
      if (s < dist.size()) window += dist[s];
      if (s >= k && s - k < dist.size()) window -= dist[s - k];
      next[s] = window / static_cast<double>(k);
    }
    dist = std::move(next);
  }
  const long long low = std::min(discordant, pairs - discordant);
  double tail = 0.0;
  for (long long s = 0; s <= low; ++s) tail += dist[static_cast<std::size_t>(s)];
  return std::min(1.0, 2.0 * tail);
}

struct TieSums {
  double pairs = 0.0;  // sum t(t-1)/2
  double v0 = 0.0;     // sum t(t-1)(t-2)
  double v1 = 0.0;     // sum t(t-1)(2t+5)
};

inline TieSums tie_sums(std::span<const double> v) {
  TieSums s;
  for (auto t : tie_groups(v)) {
    const auto d = static_cast<double>(t);
    s.pairs += d * (d - 1.0) / 2.0;
    s.v0 += d * (d - 1.0) * (d - 2.0);
    s.v1 += d * (d - 1.0) * (2.0 * d + 5.0);
  }
  return s;
}

}  // namespace detail

/// Kendall's tau-b with a two-sided p-value: exact when there are no ties and
/// n <= 33, otherwise the tie-corrected normal approximation.
inline RankCorrelationResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("kendall_tau: length mismatch");
  if (x.size() < 2) throw StatsError("kendall_tau: need at least two observations");
  RankCorrelationResult r;
  const std::size_t n = x.size();
  r.n = n;
  long long concordant = 0;
  long long discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double prod = dx * dy;
      if (prod > 0) ++concordant;
      if (prod < 0) ++discordant;
    }
  }
  const auto tx = detail::tie_sums(x);
  const auto ty = detail::tie_sums(y);
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom = std::sqrt((n0 - tx.pairs) * (n0 - ty.pairs));
  if (denom <= 0.0) return r;
  r.defined = true;
  const double s = static_cast<double>(concordant - discordant);
  r.tau = std::clamp(s / denom, -1.0, 1.0);

  if (tx.pairs == 0.0 && ty.pairs == 0.0 && n <= kKendallExactMax) {
    r.exact = true;
    r.p_value = detail::kendall_exact_p(n, discordant);
    return r;
  }
  const double nd = static_cast<double>(n);
  const double m = nd * (nd - 1.0);
  double var = (m * (2.0 * nd + 5.0) - tx.v1 - ty.v1) / 18.0 + 2.0 * tx.pairs * ty.pairs / m;
  if (n > 2) var += tx.v0 * ty.v0 / (9.0 * m * (nd - 2.0));
  r.p_value = var > 0.0 ? std::min(1.0, normal_two_sided(s / std::sqrt(var))) : 1.0;
  return r;
}

struct MetricValidationOptions {
  /// Adds the reference condition itself as a point with zero error.
  bool include_reference = true;
};

/// Rank correlation between each condition's distance from the reference
/// metric value and its median human-likeness.
inline RankCorrelationResult metric_validation(std::span<const double> metric_values, double reference_value,
                                               std::span<const double> medians,
                                               std::optional<double> reference_median = std::nullopt,
                                               const MetricValidationOptions& opt = {}) {
  if (metric_values.size() != medians.size()) throw StatsError("metric_validation: length mismatch");
  std::vector<double> err;
  std::vector<double> med(medians.begin(), medians.end());
  for (double v : metric_values) err.push_back(std::abs(v - reference_value));
  if (opt.include_reference) {
    if (!reference_median) throw StatsError("metric_validation: reference median required to include the reference");
    err.push_back(0.0);
    med.push_back(*reference_median);
  }
  return kendall_tau(err, med);
}

}  // namespace genea::stats
