#pragma once

// Turns screened responses into per-condition summaries and pairwise
// significance matrices for either study type.

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "genea/design.hpp"
#include "genea/stats/barnard.hpp"
#include "genea/stats/binomial.hpp"
#include "genea/stats/holm.hpp"
#include "genea/stats/intervals.hpp"
#include "genea/stats/responses.hpp"
#include "genea/stats/wilcoxon.hpp"
#include "json.hpp"

namespace genea::stats {

enum class Direction { kAAboveB, kBAboveA, kNone };

inline std::string to_string(Direction d) {
  switch (d) {
    case Direction::kAAboveB: return "a-above-b";
    case Direction::kBAboveA: return "b-above-a";
    case Direction::kNone: return "none";
  }
  return "none";
}

struct PairwiseTestResult {
  std::string condition_a;
  std::string condition_b;
  std::size_t n_pairs = 0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  Direction direction = Direction::kNone;  // set only when significant
  bool significant = false;
};

struct RatingSummary {
  std::string condition;
  std::size_t n = 0;
  double median = 0.0;
  Interval median_ci;
  double mean = 0.0;
  Interval mean_ci;
};

struct PreferenceSummary {
  std::string condition;
  PreferenceCounts counts;
  BinomialCounts split;
  double percent_matched = 0.0;  // unrounded
  Interval ci;                   // proportion, rounded outward to 0.1 pp
  int chance = 0;                // +1 above chance, -1 below, 0 overlaps 50%
};

struct AnalysisOptions {
  double alpha = kAlpha;
  double level = 0.95;
  TieConvention ties = TieConvention::kCeilToMatched;
  BarnardOptions barnard;
};

struct StatsReport {
  std::string study_id;
  StudyType study = StudyType::kHumanlikeness;
  std::vector<std::string> conditions;
  std::vector<RatingSummary> ratings;
  std::vector<PreferenceSummary> preferences;
  std::vector<PairwiseTestResult> pairwise;
  AnalysisOptions options;
  std::size_t responses_used = 0;
  std::size_t degenerate_pairs = 0;  // Wilcoxon pairs with only zero differences

  /// 'A' when the row condition is significantly above the column one, 'B' below, 'N' otherwise.
  std::vector<std::string> significance_matrix() const {
    std::map<std::pair<std::string, std::string>, char> cell;
    for (const auto& p : pairwise) {
      const char ab = p.direction == Direction::kAAboveB ? 'A' : p.direction == Direction::kBAboveA ? 'B' : 'N';
      const char ba = ab == 'A' ? 'B' : ab == 'B' ? 'A' : 'N';
      cell[{p.condition_a, p.condition_b}] = ab;
      cell[{p.condition_b, p.condition_a}] = ba;
    }
    std::vector<std::string> rows;
    for (const auto& a : conditions) {
      std::string row;
      for (const auto& b : conditions) {
        if (a == b) {
          row += '-';
          continue;
        }
        auto it = cell.find({a, b});
        row += it == cell.end() ? 'N' : it->second;
      }
      rows.push_back(row);
    }
    return rows;
  }

  std::size_t significant_pairs() const {
    std::size_t n = 0;
    for (const auto& p : pairwise) n += p.significant ? 1 : 0;
    return n;
  }

  const PairwiseTestResult* pair(const std::string& a, const std::string& b) const {
    for (const auto& p : pairwise) {
      if ((p.condition_a == a && p.condition_b == b) || (p.condition_a == b && p.condition_b == a)) return &p;
    }
    return nullptr;
  }
};

namespace detail {

inline void apply_holm(std::vector<PairwiseTestResult>& tests, double alpha) {
  std::vector<double> raw;
  for (const auto& t : tests) raw.push_back(t.raw_p);
  const auto adj = holm_bonferroni(raw);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    tests[i].adjusted_p = adj[i];
    tests[i].significant = adj[i] < alpha;
    if (!tests[i].significant) tests[i].direction = Direction::kNone;
  }
}

/// Rounds to the nearest multiple of step, for display.
inline double round_to(double x, double step) { return std::round(x / step) * step; }

}  // namespace detail

/// Summary of one condition's split-tie preferences.
inline PreferenceSummary summarize_preferences(const std::string& condition, const PreferenceCounts& counts,
                                               const AnalysisOptions& opt = {}) {
  PreferenceSummary s;
  s.condition = condition;
  s.counts = counts;
  s.split = split_ties(counts, opt.ties);
  s.percent_matched = 100.0 * s.split.proportion();
  s.ci = clopper_pearson(s.split.successes, s.split.trials, opt.level);
  s.chance = s.ci.lo > 0.5 ? 1 : s.ci.hi < 0.5 ? -1 : 0;
  return s;
}

/// Barnard tests with Holm correction over all condition pairs of split counts.
inline std::vector<PairwiseTestResult> pairwise_barnard(const std::vector<PreferenceSummary>& s, const AnalysisOptions& opt = {}) {
  std::vector<PairwiseTestResult> tests;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const auto& a = s[i].split;
      const auto& b = s[j].split;
      PairwiseTestResult t;
      t.condition_a = s[i].condition;
      t.condition_b = s[j].condition;
      t.n_pairs = a.trials + b.trials;
      t.raw_p = barnard_test(a.successes, a.trials - a.successes, b.successes, b.trials - b.successes, opt.barnard).p_value;
      t.direction = a.proportion() > b.proportion() ? Direction::kAAboveB : a.proportion() < b.proportion() ? Direction::kBAboveA : Direction::kNone;
      tests.push_back(std::move(t));
    }
  }
  detail::apply_holm(tests, opt.alpha);
  return tests;
}

/// Analyzes screened analysis rows (training and attention-check rows removed).
inline StatsReport analyze_study(const StudyDesign& design, std::span<const Response> rows, const AnalysisOptions& opt = {}) {
  StatsReport rep;
  rep.study_id = design.study_id;
  rep.study = design.study;
  rep.conditions = design.conditions;
  rep.options = opt;
  if (rows.empty()) throw StatsError("no responses to analyze");

  if (design.study == StudyType::kHumanlikeness) {
    std::map<std::string, std::vector<double>> by_condition;
    std::map<std::pair<std::string, std::size_t>, std::map<std::string, double>> by_page;
    for (const auto& r : rows) {
      if (r.kind != ResponseKind::kRating || !r.rating || r.is_attention_check()) continue;
      by_condition[r.condition].push_back(*r.rating);
      by_page[{r.participant, r.page}][r.condition] = *r.rating;
      ++rep.responses_used;
    }
    for (const auto& c : design.conditions) {
      const auto it = by_condition.find(c);
      if (it == by_condition.end() || it->second.size() < 2)
        throw StatsError("condition " + c + " has too few ratings to summarize");
      RatingSummary s;
      s.condition = c;
      s.n = it->second.size();
      const auto mci = median_ci(it->second, opt.level);
      s.median = mci.median;
      s.median_ci = mci.ci;
      const auto tci = mean_ci(it->second, opt.level);
      s.mean = tci.mean;
      s.mean_ci = tci.ci;
      rep.ratings.push_back(s);
    }
    for (std::size_t i = 0; i < design.conditions.size(); ++i) {
      for (std::size_t j = i + 1; j < design.conditions.size(); ++j) {
        const auto& a = design.conditions[i];
        const auto& b = design.conditions[j];
        std::vector<double> diffs;
        for (const auto& [key, page] : by_page) {
          const auto ia = page.find(a);
          const auto ib = page.find(b);
          if (ia != page.end() && ib != page.end()) diffs.push_back(ia->second - ib->second);
        }
        if (diffs.empty()) continue;
        const auto w = wilcoxon_signed_rank(std::span<const double>(diffs));
        PairwiseTestResult t;
        t.condition_a = a;
        t.condition_b = b;
        t.n_pairs = diffs.size();
        t.raw_p = w.p_value;
        if (w.degenerate) ++rep.degenerate_pairs;
        const double centre = static_cast<double>(w.n_nonzero) * static_cast<double>(w.n_nonzero + 1) / 4.0;
        t.direction = w.statistic > centre ? Direction::kAAboveB : w.statistic < centre ? Direction::kBAboveA : Direction::kNone;
        rep.pairwise.push_back(std::move(t));
      }
    }
    detail::apply_holm(rep.pairwise, opt.alpha);
  } else {
    std::map<std::string, PreferenceCounts> counts;
    for (const auto& r : rows) {
      if (r.kind != ResponseKind::kPreference || !r.choice || r.is_attention_check()) continue;
      auto& c = counts[r.condition];
      if (*r.choice == Choice::kMatched) ++c.matched;
      if (*r.choice == Choice::kTie) ++c.tie;
      if (*r.choice == Choice::kMismatched) ++c.mismatched;
      ++rep.responses_used;
    }
    for (const auto& c : design.conditions) {
      const auto it = counts.find(c);
      if (it == counts.end() || it->second.total() == 0) throw StatsError("condition " + c + " has no preference responses");
      rep.preferences.push_back(summarize_preferences(c, it->second, opt));
    }
    rep.pairwise = pairwise_barnard(rep.preferences, opt);
  }
  if (rep.responses_used == 0) throw StatsError("no usable responses for this study type");
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json to_json(const StatsReport& r) {
  using nlohmann::json;
  json j;
  j["study_id"] = r.study_id;
  j["study"] = to_string(r.study);
  j["conditions"] = r.conditions;
  j["alpha"] = r.options.alpha;
  j["confidence_level"] = r.options.level;
  j["responses_used"] = r.responses_used;
  j["method"] = r.study == StudyType::kHumanlikeness
                    ? json{{"pairwise", "wilcoxon signed-rank, two-sided, zero differences dropped, midranks"},
                           {"correction", "holm"},
                           {"median_ci", "order statistics, binomial"},
                           {"mean_ci", "student t"},
                           {"degenerate_pairs", r.degenerate_pairs}}
                    : json{{"pairwise", "barnard, pooled score statistic"},
                           {"nuisance_grid_step", r.options.barnard.grid_step},
                           {"correction", "holm"},
                           {"ties", to_string(r.options.ties)},
                           {"ci", "clopper-pearson, rounded outward to 0.1 pp"},
                           {"chance_check", "uncorrected"}};
  json conds = json::array();
  for (const auto& s : r.ratings) {
    conds.push_back({{"condition", s.condition},
                     {"n", s.n},
                     {"median", s.median},
                     {"median_ci", {s.median_ci.lo, s.median_ci.hi}},
                     {"mean", s.mean},
                     {"mean_ci", {s.mean_ci.lo, s.mean_ci.hi}}});
  }
  for (const auto& s : r.preferences) {
    conds.push_back({{"condition", s.condition},
                     {"matched", s.counts.matched},
                     {"tie", s.counts.tie},
                     {"mismatched", s.counts.mismatched},
                     {"successes", s.split.successes},
                     {"trials", s.split.trials},
                     {"percent_matched", detail::round_to(s.percent_matched, 0.1)},
                     {"ci_percent", {detail::round_to(100.0 * s.ci.lo, 0.1), detail::round_to(100.0 * s.ci.hi, 0.1)}},
                     {"chance", s.chance > 0 ? "above" : s.chance < 0 ? "below" : "overlaps"}});
  }
  j["summary"] = conds;
  json pairs = json::array();
  for (const auto& p : r.pairwise) {
    pairs.push_back({{"a", p.condition_a},
                     {"b", p.condition_b},
                     {"n_pairs", p.n_pairs},
                     {"raw_p", p.raw_p},
                     {"adjusted_p", p.adjusted_p},
                     {"significant", p.significant},
                     {"direction", to_string(p.direction)}});
  }
  j["pairwise"] = pairs;
  j["significance_matrix"] = r.significance_matrix();
  return j;
}

/// Human-readable summary table followed by the significance matrix.
inline std::string format_report(const StatsReport& r) {
  std::ostringstream out;
  char buf[256];
  if (r.study == StudyType::kHumanlikeness) {
    out << "Condition  Median          Mean\n";
    for (const auto& s : r.ratings) {
      std::snprintf(buf, sizeof buf, "%-9s  %4.1f [%g, %g]  %4.1f +/- %.1f\n", s.condition.c_str(), detail::round_to(s.median, 0.5),
                    s.median_ci.lo, s.median_ci.hi, s.mean, (s.mean_ci.hi - s.mean_ci.lo) / 2.0);
      out << buf;
    }
  } else {
    out << "Condition  Matched  Tie  Mismatched  Percent matched\n";
    for (const auto& s : r.preferences) {
      std::snprintf(buf, sizeof buf, "%-9s  %7zu  %3zu  %10zu  %.1f [%.1f, %.1f]%s\n", s.condition.c_str(), s.counts.matched,
                    s.counts.tie, s.counts.mismatched, detail::round_to(s.percent_matched, 0.1), 100.0 * s.ci.lo,
                    100.0 * s.ci.hi, s.chance == 0 ? " (chance)" : "");
      out << buf;
    }
  }
  out << "\nSignificance (row vs column; A above, B below, N none) at alpha " << r.options.alpha << ", Holm-corrected\n";
  out << "         ";
  for (const auto& c : r.conditions) out << ' ' << c;
  out << '\n';
  const auto m = r.significance_matrix();
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-9s", r.conditions[i].c_str());
    out << buf;
    for (char c : m[i]) out << "   " << c;
    out << '\n';
  }
  return out.str();
}

}  // namespace genea::stats
