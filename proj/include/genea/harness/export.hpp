#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "genea/harness/store.hpp"
#include "genea/stats/responses.hpp"

namespace genea::harness {

inline std::string export_responses(const StoreState& s) {
  std::ostringstream out;
  stats::write_responses_csv(out, s.responses);
  return out.str();
}

/// One row per participant; columns are the union of answer keys, sorted.
inline std::string export_demographics(const StoreState& s) {
  std::set<std::string> keys;
  for (const auto& [p, answers] : s.demographics) {
    for (const auto& [k, v] : answers.items()) keys.insert(k);
  }
  std::ostringstream out;
  out << "participant";
  for (const auto& k : keys) out << ',' << stats::detail::csv_field(k);
  out << '\n';
  for (const auto& [p, answers] : s.demographics) {
    out << stats::detail::csv_field(p);
    for (const auto& k : keys) {
      out << ',';
      if (!answers.contains(k)) continue;
      const auto& v = answers[k];
      out << stats::detail::csv_field(v.is_string() ? v.get<std::string>() : v.dump());
    }
    out << '\n';
  }
  return out.str();
}

/// Writes responses.csv and demographics.csv into dir.
inline void export_store(const StoreState& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "responses.csv", std::ios::binary) << export_responses(s);
  std::ofstream(dir / "demographics.csv", std::ios::binary) << export_demographics(s);
}

}  // namespace genea::harness
