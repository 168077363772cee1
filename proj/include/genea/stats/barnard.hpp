#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

struct BarnardOptions {
  double grid_step = 0.001;  // nuisance grid excludes both endpoints
  double tolerance = 1e-7;   // tables within this of the observed |statistic| count as extreme
};

struct BarnardResult {
  double statistic = 0.0;  // pooled score statistic of the observed table
  double p_value = 1.0;
  double nuisance = 0.5;   // grid point where the maximum was attained
};

/// Score statistic with pooled variance for x1/n1 vs x2/n2; 0 when the pooled
/// proportion is 0 or 1.
inline double barnard_statistic(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2) {
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double pooled = (static_cast<double>(x1) + static_cast<double>(x2)) / (a + b);
  if (pooled <= 0.0 || pooled >= 1.0) return 0.0;
  const double diff = static_cast<double>(x1) / a - static_cast<double>(x2) / b;
  return diff / std::sqrt(pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b));
}

namespace detail {

inline std::vector<double> binomial_pmf(std::size_t n, double p) {
  std::vector<double> out(n + 1);
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::size_t k = 0; k <= n; ++k) {
    const auto kd = static_cast<double>(k);
    const auto rest = static_cast<double>(n - k);
    out[k] = std::exp(lgn - std::lgamma(kd + 1.0) - std::lgamma(rest + 1.0) + kd * lp + rest * lq);
  }
  return out;
}

}  // namespace detail

/// Two-sided unconditional exact test for two independent binomials, with the
/// p-value maximized over a grid of the common success probability.
/// Arguments are successes and failures of each group.
inline BarnardResult barnard_test(std::size_t a_succ, std::size_t a_fail, std::size_t b_succ, std::size_t b_fail,
                                  const BarnardOptions& opt = {}) {
  const std::size_t n1 = a_succ + a_fail;
  const std::size_t n2 = b_succ + b_fail;
  if (n1 == 0 || n2 == 0) throw StatsError("Barnard test needs at least one observation per group");
  if (!(opt.grid_step > 0.0 && opt.grid_step < 0.5)) throw StatsError("invalid nuisance grid step");
  BarnardResult r;
  r.statistic = barnard_statistic(a_succ, n1, b_succ, n2);
  const double threshold = std::abs(r.statistic) - opt.tolerance;
  if (threshold <= 0.0) {
    r.p_value = 1.0;
    return r;
  }

  // Extreme tables as maximal runs of x2 for each x1.
  struct Run {
    std::size_t x1, lo, hi;  // inclusive
  };
  std::vector<Run> runs;
  for (std::size_t x1 = 0; x1 <= n1; ++x1) {
    std::size_t x2 = 0;
    while (x2 <= n2) {
      if (std::abs(barnard_statistic(x1, n1, x2, n2)) >= threshold) {
        const std::size_t lo = x2;
        while (x2 + 1 <= n2 && std::abs(barnard_statistic(x1, n1, x2 + 1, n2)) >= threshold) ++x2;
        runs.push_back({x1, lo, x2});
      }
      ++x2;
    }
  }

  std::vector<double> prefix(n2 + 2);
  std::vector<double> suffix(n2 + 2);
  r.p_value = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / opt.grid_step));
  for (std::size_t i = 1; i < steps; ++i) {
    const double pi = static_cast<double>(i) * opt.grid_step;
    const auto f1 = detail::binomial_pmf(n1, pi);
    const auto f2 = detail::binomial_pmf(n2, pi);
    prefix[0] = 0.0;
    for (std::size_t k = 0; k <= n2; ++k) prefix[k + 1] = prefix[k] + f2[k];
    suffix[n2 + 1] = 0.0;
    for (std::size_t k = n2 + 1; k-- > 0;) suffix[k] = suffix[k + 1] + f2[k];
    double total = 0.0;
    for (const auto& run : runs) {
      // Sum from whichever end avoids cancellation.
      const double mass = run.lo == 0 ? prefix[run.hi + 1] : run.hi == n2 ? suffix[run.lo] : prefix[run.hi + 1] - prefix[run.lo];
      total += f1[run.x1] * mass;
    }
    if (total > r.p_value) {
      r.p_value = total;
      r.nuisance = pi;
    }
  }
  r.p_value = std::min(1.0, r.p_value);
  return r;
}

}  // namespace genea::stats
