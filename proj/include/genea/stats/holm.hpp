#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

/// Holm step-down adjusted p-values, returned in input order.
inline std::vector<double> holm_bonferroni(std::span<const double> p) {
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) throw StatsError("p-value outside [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[order[k]]));
    adj[order[k]] = running;
  }
  return adj;
}

}  // namespace genea::stats
