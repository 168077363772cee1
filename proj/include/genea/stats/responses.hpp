#pragma once

// Response records and their delimited-text form.

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "genea/stats/common.hpp"

namespace genea::stats {

enum class ResponseKind { kRating, kPreference, kBroken };
enum class Choice { kMatched, kMismatched, kTie };

inline std::string to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::kRating: return "rating";
    case ResponseKind::kPreference: return "preference";
    case ResponseKind::kBroken: return "broken";
  }
  return "rating";
}

inline std::string to_string(Choice c) {
  switch (c) {
    case Choice::kMatched: return "matched";
    case Choice::kMismatched: return "mismatched";
    case Choice::kTie: return "tie";
  }
  return "tie";
}

inline std::optional<ResponseKind> parse_response_kind(std::string_view s) {
  if (s == "rating") return ResponseKind::kRating;
  if (s == "preference") return ResponseKind::kPreference;
  if (s == "broken") return ResponseKind::kBroken;
  return std::nullopt;
}

inline std::optional<Choice> parse_choice(std::string_view s) {
  if (s == "matched") return Choice::kMatched;
  if (s == "mismatched") return Choice::kMismatched;
  if (s == "tie") return Choice::kTie;
  return std::nullopt;
}

/// Condition column value for attention-check stimuli.
inline constexpr const char* kAttentionCheckCondition = "attention_check";

/// One rater judgment. Ratings carry `rating`, preferences carry `choice`
/// (already resolved against the matched side), broken reports carry neither.
struct Response {
  std::string study_id;
  std::string participant;
  std::size_t page = 0;
  std::size_t slot = 0;
  std::string condition;
  std::string segment;
  ResponseKind kind = ResponseKind::kRating;
  std::optional<int> rating;
  std::optional<Choice> choice;
  bool reported_broken = false;
  std::int64_t timestamp_ms = 0;

  bool is_attention_check() const { return condition == kAttentionCheckCondition; }
  bool operator==(const Response&) const = default;
};

class CsvError : public StatsError {
 public:
  CsvError(std::size_t row, const std::string& what) : StatsError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

inline constexpr const char* kResponseColumns =
    "study_id,participant,page,slot,condition,segment,response_kind,value,reported_broken,timestamp_ms";

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Splits one record; quoted fields may not span lines.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"' && fields.back().empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw CsvError(row, "unterminated quoted field");
  return fields;
}

template <typename T>
T parse_integer(const std::string& s, std::size_t row, const char* column) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw CsvError(row, std::string("column ") + column + ": '" + s + "' is not an integer");
  return v;
}

}  // namespace detail

inline std::string response_value(const Response& r) {
  if (r.kind == ResponseKind::kRating && r.rating) return std::to_string(*r.rating);
  if (r.kind == ResponseKind::kPreference && r.choice) return to_string(*r.choice);
  return "";
}

inline void write_responses_csv(std::ostream& out, std::span<const Response> rows) {
  out << kResponseColumns << '\n';
  for (const auto& r : rows) {
    out << detail::csv_field(r.study_id) << ',' << detail::csv_field(r.participant) << ',' << r.page << ',' << r.slot
        << ',' << detail::csv_field(r.condition) << ',' << detail::csv_field(r.segment) << ',' << to_string(r.kind)
        << ',' << response_value(r) << ',' << (r.reported_broken ? 1 : 0) << ',' << r.timestamp_ms << '\n';
  }
}

/// Reads the response schema. Row numbers in errors count the header as row 1.
inline std::vector<Response> read_responses_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResponseColumns) throw CsvError(1, "unexpected header '" + line + "'");
  std::vector<Response> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line, row);
    if (f.size() != 10) throw CsvError(row, "expected 10 fields, found " + std::to_string(f.size()));
    Response r;
    r.study_id = f[0];
    r.participant = f[1];
    if (r.participant.empty()) throw CsvError(row, "empty participant");
    r.page = detail::parse_integer<std::size_t>(f[2], row, "page");
    r.slot = detail::parse_integer<std::size_t>(f[3], row, "slot");
    r.condition = f[4];
    r.segment = f[5];
    const auto kind = parse_response_kind(f[6]);
    if (!kind) throw CsvError(row, "unknown response_kind '" + f[6] + "'");
    r.kind = *kind;
    if (r.kind == ResponseKind::kRating) {
      const int v = detail::parse_integer<int>(f[7], row, "value");
      if (v < 0 || v > 100) throw CsvError(row, "rating " + f[7] + " outside 0..100");
      r.rating = v;
    } else if (r.kind == ResponseKind::kPreference) {
      r.choice = parse_choice(f[7]);
      if (!r.choice) throw CsvError(row, "unknown preference '" + f[7] + "'");
    } else if (!f[7].empty()) {
      throw CsvError(row, "broken report carries a value");
    }
    if (f[8] != "0" && f[8] != "1") throw CsvError(row, "reported_broken must be 0 or 1");
    r.reported_broken = f[8] == "1";
    r.timestamp_ms = detail::parse_integer<std::int64_t>(f[9], row, "timestamp_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace genea::stats
