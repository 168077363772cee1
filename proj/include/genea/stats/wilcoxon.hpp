#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <utility>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

/// Largest nonzero-difference count for which the exact null distribution is used.
inline constexpr std::size_t kWilcoxonExactMax = 25;

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of midranks of positive differences
  std::size_t n_nonzero = 0;
  std::size_t n_zero = 0;
  double p_value = 1.0;
  bool exact = false;
  bool degenerate = false;  // no nonzero differences
};

/// Two-sided Wilcoxon signed-rank test on paired differences. Zeros are
/// dropped, ties get midranks. Exact when at most 25 differences remain.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
  WilcoxonResult r;
  std::vector<double> d;
  for (double x : differences) {
    if (!std::isfinite(x)) throw StatsError("non-finite difference");
    if (x == 0.0) {
      ++r.n_zero;
    } else {
      d.push_back(x);
    }
  }
  r.n_nonzero = d.size();
  if (d.empty()) {
    r.degenerate = true;
    return r;
  }
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = midranks(mag);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) r.statistic += ranks[i];
  }
  const auto n = static_cast<double>(d.size());

  if (d.size() <= kWilcoxonExactMax) {
    // Midranks are multiples of 1/2, so doubled ranks are integers and the
    // null distribution of doubled W+ has integer support.
    std::vector<std::size_t> doubled(d.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<std::uint64_t> ways(total + 1, 0);
    ways[0] = 1;
    for (auto w : doubled) {
      for (std::size_t s = total; s >= w; --s) {
        ways[s] += ways[s - w];
        if (s == w) break;
      }
    }
    const auto obs = static_cast<long long>(std::llround(2.0 * r.statistic));
    const long long centre = static_cast<long long>(total);  // compare 2*W against total
    const long long dev = std::llabs(2 * obs - centre);
    long double hits = 0;
    for (std::size_t s = 0; s <= total; ++s) {
      if (std::llabs(2 * static_cast<long long>(s) - centre) >= dev) hits += static_cast<long double>(ways[s]);
    }
    r.p_value = static_cast<double>(std::min<long double>(1.0L, hits / std::ldexp(1.0L, static_cast<int>(d.size()))));
    r.exact = true;
    return r;
  }

  double tie_term = 0.0;
  for (auto t : tie_groups(mag)) {
    const auto tt = static_cast<double>(t);
    tie_term += tt * tt * tt - tt;
  }
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  r.p_value = var > 0 ? std::min(1.0, normal_two_sided((r.statistic - mu) / std::sqrt(var))) : 1.0;
  return r;
}

/// Paired form: differences a - b.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& [a, b] : pairs) d.push_back(a - b);
  return wilcoxon_signed_rank(std::span<const double>(d));
}

}  // namespace genea::stats
