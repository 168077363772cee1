#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "genea/stats/common.hpp"
#include "genea/stats/intervals.hpp"

namespace genea::stats {

/// Preference counts for one condition: matched chosen, "equal", mismatched chosen.
struct PreferenceCounts {
  std::size_t matched = 0;
  std::size_t tie = 0;
  std::size_t mismatched = 0;

  std::size_t total() const { return matched + tie + mismatched; }
  bool operator==(const PreferenceCounts&) const = default;
};

/// Where the odd half of an odd tie count goes.
enum class TieConvention { kCeilToMatched, kFloorToMatched };

inline std::string to_string(TieConvention c) { return c == TieConvention::kCeilToMatched ? "ceil-to-matched" : "floor-to-matched"; }

struct BinomialCounts {
  std::size_t successes = 0;
  std::size_t trials = 0;

  double proportion() const { return static_cast<double>(successes) / static_cast<double>(trials); }
};

inline BinomialCounts split_ties(const PreferenceCounts& c, TieConvention conv = TieConvention::kCeilToMatched) {
  if (c.total() == 0) throw StatsError("no preference responses to split");
  const std::size_t half = conv == TieConvention::kCeilToMatched ? (c.tie + 1) / 2 : c.tie / 2;
  return {c.matched + half, c.total()};
}

/// Exact binomial interval from Beta quantiles; endpoints are proportions.
inline Interval clopper_pearson_raw(std::size_t successes, std::size_t trials, double level = 0.95) {
  if (trials == 0 || successes > trials) throw StatsError("invalid binomial counts");
  if (!(level > 0.0 && level < 1.0)) throw StatsError("confidence level must lie in (0, 1)");
  const double a = (1.0 - level) / 2.0;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  const double lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, a);
  const double hi = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - a);
  return {lo, hi};
}

/// Default reporting grid: 0.1 percentage point.
inline constexpr double kProportionPrecision = 0.001;

/// Clopper-Pearson interval rounded outward to `precision` (a proportion).
inline Interval clopper_pearson(std::size_t successes, std::size_t trials, double level = 0.95,
                                double precision = kProportionPrecision) {
  auto iv = round_outward(clopper_pearson_raw(successes, trials, level), precision);
  iv.lo = std::max(0.0, iv.lo);
  iv.hi = std::min(1.0, iv.hi);
  return iv;
}

}  // namespace genea::stats
