#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace genea::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Family-wise significance level used throughout.
inline constexpr double kAlpha = 0.05;

inline double median(std::vector<double> v) {
  if (v.empty()) throw StatsError("median of an empty sample");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double median(std::span<const double> v) { return median(std::vector<double>(v.begin(), v.end())); }

inline double mean(std::span<const double> v) {
  if (v.empty()) throw StatsError("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Two-sided normal tail probability P(|Z| >= |z|).
inline double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

/// Midranks (1-based) of v; tied values share the mean of their ranks.
inline std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

/// Sizes of tie groups (only groups with more than one member).
inline std::vector<std::size_t> tie_groups(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
    if (j > i) out.push_back(j - i + 1);
    i = j + 1;
  }
  return out;
}

}  // namespace genea::stats
