#pragma once

// Reference per-condition summary values of a full-scale evaluation:
// human-likeness medians, appropriateness count triples with their printed
// split-tie percentages and intervals, and the objective metric values.

#include <string>
#include <vector>

#include "genea/stats/binomial.hpp"
#include "genea/stats/kendall.hpp"

namespace genea::fixtures {

struct ConditionRow {
  std::string id;
  double median;  // human-likeness
  std::size_t matched, tie, mismatched;
  double percent, lo, hi;  // printed percent matched and 95% CI, in percent
  double jerk, accel, cca, hellinger, fgd;
};

struct TierTable {
  std::string tier;
  ConditionRow reference;
  std::vector<ConditionRow> systems;  // ordered by decreasing median
};

inline TierTable full_body() {
  return {"full-body",
          {"FNA", 70, 590, 138, 163, 74.0, 70.9, 76.9, 31300, 798, 1.0, 0.0, 0.0},
          {
              {"FSA", 71, 393, 216, 269, 57.1, 53.7, 60.4, 14600, 668, 0.849, 0.041, 3.18},
              {"FSC", 53, 347, 237, 295, 53.0, 49.5, 56.3, 5130, 332, 0.818, 0.125, 16.4},
              {"FSI", 46, 403, 178, 312, 55.1, 51.7, 58.4, 7370, 345, 0.789, 0.111, 4.87},
              {"FSF", 38, 388, 130, 359, 51.7, 48.2, 55.1, 22600, 666, 0.916, 0.195, 7.49},
              {"FSG", 38, 406, 184, 319, 54.8, 51.4, 58.1, 5560, 282, 0.992, 0.060, 10.1},
              {"FSH", 36, 445, 166, 262, 60.5, 57.1, 63.8, 8630, 313, 0.968, 0.104, 4.02},
              {"FSD", 34, 329, 256, 302, 51.5, 48.1, 54.9, 8690, 405, 0.886, 0.132, 43.4},
              {"FSB", 30, 397, 163, 330, 53.8, 50.4, 57.1, 27200, 628, 0.782, 0.050, 16.3},
              {"FBT", 27.5, 278, 362, 250, 51.6, 48.2, 55.0, 3510, 177, 0.738, 0.267, 28.6},
          }};
}

inline TierTable upper_body() {
  return {"upper-body",
          {"UNA", 63, 691, 107, 189, 75.4, 72.5, 78.1, 33000, 842, 1.0, 0.0, 0.0},
          {
              {"USQ", 69, 504, 182, 310, 59.7, 56.6, 62.9, 15400, 710, 0.685, 0.043, 2.84},
              {"USJ", 53, 461, 164, 365, 54.8, 51.6, 58.0, 8280, 375, 0.640, 0.197, 4.83},
              {"USO", 48, 439, 209, 335, 55.3, 52.1, 58.5, 5450, 353, 0.812, 0.129, 16.4},
              {"USN", 44, 443, 190, 352, 54.6, 51.4, 57.8, 7510, 384, 0.789, 0.092, 194},
              {"USK", 41, 454, 185, 353, 55.1, 51.9, 58.3, 8180, 311, 0.962, 0.137, 15.5},
              {"USM", 41, 503, 175, 328, 58.7, 55.5, 61.8, 6840, 385, 0.991, 0.039, 2.17},
              {"UBT", 36, 341, 367, 287, 52.7, 49.5, 55.9, 3760, 190, 0.707, 0.248, 18.2},
              {"UBA", 33, 424, 264, 303, 56.1, 52.9, 59.3, 18000, 513, 0.964, 0.244, 17.0},
              {"USP", 29.5, 440, 180, 376, 53.2, 50.0, 56.4, 28500, 661, 0.769, 0.051, 18.0},
              {"USL", 22, 282, 548, 159, 56.2, 53.0, 59.4, 7730, 258, 0.849, 0.306, 28.4},
          }};
}

enum class Metric { kJerk, kAccel, kCca, kHellinger, kFgd };

inline double metric_of(const ConditionRow& r, Metric m) {
  switch (m) {
    case Metric::kJerk: return r.jerk;
    case Metric::kAccel: return r.accel;
    case Metric::kCca: return r.cca;
    case Metric::kHellinger: return r.hellinger;
    case Metric::kFgd: return r.fgd;
  }
  return 0.0;
}

/// One reference rank-correlation cell. `versus_appropriateness` correlates
/// against split-tie percent matched instead of median human-likeness.
struct CorrelationTarget {
  Metric metric;
  std::string label;
  bool versus_appropriateness;
  double tau;
  double p;
};

inline std::vector<CorrelationTarget> full_body_correlations() {
  return {{Metric::kJerk, "jerk vs hum", false, -0.09, 0.72},   {Metric::kAccel, "accel vs hum", false, -0.36, 0.15},
          {Metric::kCca, "cca vs hum", false, -0.36, 0.16},     {Metric::kCca, "cca vs app", true, -0.38, 0.15},
          {Metric::kHellinger, "hellinger vs hum", false, -0.36, 0.15}, {Metric::kFgd, "fgd vs hum", false, -0.49, 0.048}};
}

inline std::vector<CorrelationTarget> upper_body_correlations() {
  return {{Metric::kJerk, "jerk vs hum", false, -0.11, 0.64},   {Metric::kAccel, "accel vs hum", false, -0.26, 0.27},
          {Metric::kCca, "cca vs hum", false, 0.11, 0.64},      {Metric::kCca, "cca vs app", true, -0.49, 0.041},
          {Metric::kHellinger, "hellinger vs hum", false, -0.40, 0.085}, {Metric::kFgd, "fgd vs hum", false, -0.51, 0.029}};
}

/// Split-tie percent matched computed from the count triple.
inline double split_percent(const ConditionRow& r) {
  return 100.0 * stats::split_ties({r.matched, r.tie, r.mismatched}).proportion();
}

/// Evaluates one correlation cell from the embedded tables, reference included.
inline stats::RankCorrelationResult correlate(const TierTable& t, const CorrelationTarget& c) {
  std::vector<double> values;
  std::vector<double> scores;
  for (const auto& r : t.systems) {
    values.push_back(metric_of(r, c.metric));
    scores.push_back(c.versus_appropriateness ? split_percent(r) : r.median);
  }
  const double ref_score = c.versus_appropriateness ? split_percent(t.reference) : t.reference.median;
  return stats::metric_validation(values, metric_of(t.reference, c.metric), scores, ref_score);
}

}  // namespace genea::fixtures
