#pragma once

#include <span>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
};

/// Median of pairwise slopes; intercept is the median residual offset.
inline LineFit theil_sen(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("theil_sen: length mismatch");
  if (x.size() < 2) throw StatsError("theil_sen: need at least two points");
  std::vector<double> slopes;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[i] != x[j]) slopes.push_back((y[j] - y[i]) / (x[j] - x[i]));
    }
  }
  if (slopes.empty()) throw StatsError("theil_sen: all x values are equal");
  LineFit fit;
  fit.slope = median(std::move(slopes));
  std::vector<double> offsets(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) offsets[i] = y[i] - fit.slope * x[i];
  fit.intercept = median(std::move(offsets));
  return fit;
}

}  // namespace genea::stats
