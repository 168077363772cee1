#pragma once

// Attention-check screening of raw responses against a study design.

#include <cstdlib>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "genea/design.hpp"
#include "genea/stats/responses.hpp"

namespace genea::stats {

struct ScreeningRules {
  int slider_tolerance = 3;
  std::size_t max_failed_checks = 1;       // more failures exclude
  std::size_t max_broken_on_scored = 3;    // more broken reports on non-check pages exclude
};

struct ExclusionEntry {
  std::string participant;
  std::size_t failed_checks = 0;
  std::size_t broken_on_scored = 0;
  bool excluded = false;
  std::string reason;
};

struct RejectedRow {
  std::size_t index = 0;  // position in the input
  std::string participant;
  std::string reason;
};

struct ScreeningResult {
  std::vector<std::string> included;
  std::vector<ExclusionEntry> log;  // one entry per participant seen, included or not
  std::vector<RejectedRow> rejected;
  std::vector<Response> retained;   // every accepted row of included participants
  std::vector<Response> analysis;   // retained minus training and attention-check rows

  std::size_t excluded_count() const { return log.size() - included.size(); }
};

namespace detail {

struct PageInfo {
  bool training = false;
  std::vector<std::string> slot_condition;  // human-likeness slots; check slots hold the marker
  std::vector<std::optional<int>> slot_target;
  std::string condition;                    // appropriateness
  AttentionKind attention = AttentionKind::kNone;
  std::string segment;
};

inline std::map<std::string, std::map<std::size_t, PageInfo>> index_design(const StudyDesign& d) {
  std::map<std::string, std::map<std::size_t, PageInfo>> out;
  for (const auto& a : d.participants) {
    auto& pages = out[a.participant];
    for (const auto& p : a.humanlikeness_pages) {
      PageInfo info;
      info.training = p.training;
      info.segment = p.segment;
      for (const auto& s : p.slots) {
        info.slot_condition.push_back(s.is_check() ? kAttentionCheckCondition : s.condition);
        info.slot_target.push_back(s.attention_target);
      }
      pages[p.page_index] = std::move(info);
    }
    for (const auto& p : a.appropriateness_pages) {
      PageInfo info;
      info.training = p.training;
      info.segment = p.segment;
      info.condition = p.attention != AttentionKind::kNone && !p.training ? kAttentionCheckCondition : p.condition;
      info.attention = p.training ? AttentionKind::kNone : p.attention;
      pages[p.page_index] = std::move(info);
    }
  }
  return out;
}

}  // namespace detail

/// Applies the attention-check rules. A slider check passes when the rating is
/// within the tolerance of its target; a broken-report check passes when the
/// page was reported broken. Repeated (participant, page, slot) rows keep the
/// first occurrence. Screening its own retained rows again is a no-op.
inline ScreeningResult screen_participants(const StudyDesign& design, std::span<const Response> responses,
                                           const ScreeningRules& rules = {}) {
  ScreeningResult out;
  const auto index = detail::index_design(design);
  const bool hl = design.study == StudyType::kHumanlikeness;

  std::map<std::string, std::vector<std::size_t>> rows_by_participant;
  std::vector<std::string> order;
  std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    auto reject = [&](const std::string& why) { out.rejected.push_back({i, r.participant, why}); };
    const auto pit = index.find(r.participant);
    if (pit == index.end()) {
      reject("participant not in design");
      continue;
    }
    const auto page_it = pit->second.find(r.page);
    if (page_it == pit->second.end()) {
      reject("page " + std::to_string(r.page) + " not in assignment");
      continue;
    }
    const auto& page = page_it->second;
    if (hl) {
      if (r.slot >= page.slot_condition.size()) {
        reject("slot " + std::to_string(r.slot) + " out of range");
        continue;
      }
      if (r.condition != page.slot_condition[r.slot]) {
        reject("condition '" + r.condition + "' does not match the design slot");
        continue;
      }
      if (r.kind != ResponseKind::kRating && r.kind != ResponseKind::kBroken) {
        reject("preference response in a rating study");
        continue;
      }
    } else {
      if (r.slot != 0) {
        reject("appropriateness responses use slot 0");
        continue;
      }
      if (r.condition != page.condition) {
        reject("condition '" + r.condition + "' does not match the design page");
        continue;
      }
      if (r.kind == ResponseKind::kRating) {
        reject("rating response in a preference study");
        continue;
      }
    }
    if (!r.segment.empty() && r.segment != page.segment) {
      reject("segment '" + r.segment + "' does not match the design page");
      continue;
    }
    if (!seen.insert({r.participant, r.page, r.slot}).second) {
      reject("duplicate response");
      continue;
    }
    if (!rows_by_participant.count(r.participant)) order.push_back(r.participant);
    rows_by_participant[r.participant].push_back(i);
  }

  for (const auto& participant : order) {
    const auto& pages = index.at(participant);
    const auto& rows = rows_by_participant[participant];
    ExclusionEntry entry;
    entry.participant = participant;
    std::set<std::size_t> broken_pages;
    std::map<std::pair<std::size_t, std::size_t>, const Response*> by_slot;
    for (auto i : rows) {
      const auto& r = responses[i];
      by_slot[{r.page, r.slot}] = &r;
      if (r.kind == ResponseKind::kBroken || r.reported_broken) broken_pages.insert(r.page);
    }
    for (const auto& [page_index, page] : pages) {
      if (page.training) continue;
      bool check_page = page.attention != AttentionKind::kNone;
      for (std::size_t s = 0; s < page.slot_target.size(); ++s) {
        if (!page.slot_target[s]) continue;
        check_page = true;
        const auto it = by_slot.find({page_index, s});
        const bool pass = it != by_slot.end() && it->second->rating &&
                          std::abs(*it->second->rating - *page.slot_target[s]) <= rules.slider_tolerance;
        if (!pass) ++entry.failed_checks;
      }
      if (page.attention != AttentionKind::kNone && !broken_pages.count(page_index)) ++entry.failed_checks;
      if (!check_page && broken_pages.count(page_index)) ++entry.broken_on_scored;
    }
    if (entry.failed_checks > rules.max_failed_checks) {
      entry.excluded = true;
      entry.reason = "failed " + std::to_string(entry.failed_checks) + " attention checks";
    } else if (entry.broken_on_scored > rules.max_broken_on_scored) {
      entry.excluded = true;
      entry.reason = "reported " + std::to_string(entry.broken_on_scored) + " scored pages as broken";
    }
    if (!entry.excluded) {
      out.included.push_back(participant);
      for (auto i : rows) {
        const auto& r = responses[i];
        out.retained.push_back(r);
        if (!pages.at(r.page).training && !r.is_attention_check()) out.analysis.push_back(r);
      }
    }
    out.log.push_back(std::move(entry));
  }
  return out;
}

}  // namespace genea::stats
