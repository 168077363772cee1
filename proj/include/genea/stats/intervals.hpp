#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "genea/stats/common.hpp"

namespace genea::stats {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Widens [lo, hi] to the enclosing grid of the given step. A tiny guard keeps
/// values that already sit on the grid from moving a whole step.
inline Interval round_outward(Interval iv, double step) {
  if (step <= 0.0) return iv;
  constexpr double guard = 1e-9;
  return {std::floor(iv.lo / step + guard) * step, std::ceil(iv.hi / step - guard) * step};
}

struct MedianCi {
  double median = 0.0;
  Interval ci;
  std::size_t lower_rank = 0;  // 1-based order statistics
  std::size_t upper_rank = 0;
  double coverage = 0.0;
};

/// Distribution-free interval for the median from the order statistics
/// (r, n+1-r), taking the largest r whose Binomial(n, 1/2) coverage reaches
/// the requested level.
inline MedianCi median_ci(std::span<const double> values, double level = 0.95) {
  const std::size_t n = values.size();
  if (!(level > 0.0 && level < 1.0)) throw StatsError("confidence level must lie in (0, 1)");
  const boost::math::binomial_distribution<double> bin(static_cast<double>(n), 0.5);
  if (n == 0 || 1.0 - 2.0 * boost::math::pdf(bin, 0.0) < level)
    throw StatsError("sample too small for a distribution-free median interval at this level");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  MedianCi out;
  out.median = median(std::span<const double>(s));
  std::size_t r = 1;
  while (r + 1 <= (n + 1) / 2) {
    const double cov = 1.0 - 2.0 * boost::math::cdf(bin, static_cast<double>(r));  // coverage of rank r+1
    if (cov < level) break;
    ++r;
  }
  out.lower_rank = r;
  out.upper_rank = n + 1 - r;
  out.coverage = 1.0 - 2.0 * boost::math::cdf(bin, static_cast<double>(r - 1));
  out.ci = {s[r - 1], s[n - r]};
  return out;
}

struct MeanCi {
  double mean = 0.0;
  Interval ci;
  double sd = 0.0;
};

/// Student-t interval for the mean. With precision > 0 the endpoints are
/// rounded outward to that grid.
inline MeanCi mean_ci(std::span<const double> values, double level = 0.95, double precision = 0.0) {
  const std::size_t n = values.size();
  if (n < 2) throw StatsError("mean interval needs at least two values");
  if (!(level > 0.0 && level < 1.0)) throw StatsError("confidence level must lie in (0, 1)");
  MeanCi out;
  out.mean = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t_distribution<double> t(static_cast<double>(n - 1));
  const double crit = boost::math::quantile(t, 0.5 + level / 2.0);
  const double half = crit * out.sd / std::sqrt(static_cast<double>(n));
  out.ci = round_outward({out.mean - half, out.mean + half}, precision);
  return out;
}

}  // namespace genea::stats
