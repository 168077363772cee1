#pragma once

// Durable, append-only record log for the study service. Every record is
// written and synced before it is applied or acknowledged; a snapshot of the
// derived state shortens replay after a restart.

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "genea/stats/responses.hpp"
#include "json.hpp"

namespace genea::harness {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionState {
  std::string session;
  std::string token;
  std::size_t assignment = 0;  // index into the design's participant list
  std::string participant;
  std::size_t next_page = 0;   // pages are answered strictly in order
  std::set<std::size_t> slots_done;  // slots answered on next_page
  bool completed = false;
  std::int64_t created_ms = 0;
};

struct LoadFailure {
  std::string participant;
  std::size_t page = 0;
  std::int64_t timestamp_ms = 0;
};

/// Derived state; rebuilt deterministically from the log.
struct StoreState {
  std::uint64_t last_seq = 0;
  std::map<std::string, SessionState> sessions;          // by session id
  std::map<std::string, std::string> tokens;             // token -> session id
  std::vector<stats::Response> responses;                // acknowledged order
  std::map<std::string, std::size_t> response_keys;      // idempotency key -> index
  std::map<std::string, nlohmann::json> demographics;    // participant -> answers
  std::vector<LoadFailure> load_failures;
};

inline nlohmann::json response_to_json(const stats::Response& r) {
  nlohmann::json j{{"study_id", r.study_id},   {"participant", r.participant}, {"page", r.page},
                   {"slot", r.slot},           {"condition", r.condition},     {"segment", r.segment},
                   {"kind", stats::to_string(r.kind)}, {"reported_broken", r.reported_broken},
                   {"timestamp_ms", r.timestamp_ms}};
  if (r.rating) j["rating"] = *r.rating;
  if (r.choice) j["choice"] = stats::to_string(*r.choice);
  return j;
}

inline stats::Response response_from_json(const nlohmann::json& j) {
  stats::Response r;
  r.study_id = j.at("study_id").get<std::string>();
  r.participant = j.at("participant").get<std::string>();
  r.page = j.at("page").get<std::size_t>();
  r.slot = j.at("slot").get<std::size_t>();
  r.condition = j.at("condition").get<std::string>();
  r.segment = j.at("segment").get<std::string>();
  const auto kind = stats::parse_response_kind(j.at("kind").get<std::string>());
  if (!kind) throw StoreError("unknown response kind in log");
  r.kind = *kind;
  if (j.contains("rating")) r.rating = j.at("rating").get<int>();
  if (j.contains("choice")) r.choice = stats::parse_choice(j.at("choice").get<std::string>());
  r.reported_broken = j.at("reported_broken").get<bool>();
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  return r;
}

/// Record types:
///   session   {session, token, assignment, participant, created_ms}
///   response  {session, key, response, advance: bool, complete: bool}
///   progress  {session, advance: bool, complete: bool}        (page skipped after a load failure)
///   demographics {participant, answers}
inline void apply_record(StoreState& s, const nlohmann::json& rec) {
  const auto type = rec.at("type").get<std::string>();
  if (type == "session") {
    SessionState ss;
    ss.session = rec.at("session").get<std::string>();
    ss.token = rec.at("token").get<std::string>();
    ss.assignment = rec.at("assignment").get<std::size_t>();
    ss.participant = rec.at("participant").get<std::string>();
    ss.created_ms = rec.at("created_ms").get<std::int64_t>();
    s.tokens[ss.token] = ss.session;
    s.sessions[ss.session] = std::move(ss);
  } else if (type == "response" || type == "progress") {
    auto& ss = s.sessions.at(rec.at("session").get<std::string>());
    if (type == "response") {
      auto r = response_from_json(rec.at("response"));
      ss.slots_done.insert(r.slot);
      s.response_keys[rec.at("key").get<std::string>()] = s.responses.size();
      s.responses.push_back(std::move(r));
    } else {
      s.load_failures.push_back({ss.participant, ss.next_page, rec.value("timestamp_ms", std::int64_t{0})});
    }
    if (rec.value("advance", false)) {
      ++ss.next_page;
      ss.slots_done.clear();
    }
    if (rec.value("complete", false)) ss.completed = true;
  } else if (type == "demographics") {
    s.demographics[rec.at("participant").get<std::string>()] = rec.at("answers");
  } else {
    throw StoreError("unknown record type '" + type + "'");
  }
  s.last_seq = rec.at("seq").get<std::uint64_t>();
}

inline nlohmann::json state_to_json(const StoreState& s) {
  nlohmann::json j;
  j["last_seq"] = s.last_seq;
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& [id, ss] : s.sessions) {
    sessions.push_back({{"session", ss.session},
                        {"token", ss.token},
                        {"assignment", ss.assignment},
                        {"participant", ss.participant},
                        {"next_page", ss.next_page},
                        {"slots_done", ss.slots_done},
                        {"completed", ss.completed},
                        {"created_ms", ss.created_ms}});
  }
  j["sessions"] = sessions;
  nlohmann::json responses = nlohmann::json::array();
  for (const auto& r : s.responses) responses.push_back(response_to_json(r));
  j["responses"] = responses;
  j["response_keys"] = s.response_keys;
  j["demographics"] = s.demographics;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : s.load_failures) failures.push_back({{"participant", f.participant}, {"page", f.page}, {"timestamp_ms", f.timestamp_ms}});
  j["load_failures"] = failures;
  return j;
}

inline StoreState state_from_json(const nlohmann::json& j) {
  StoreState s;
  s.last_seq = j.at("last_seq").get<std::uint64_t>();
  for (const auto& sj : j.at("sessions")) {
    SessionState ss;
    ss.session = sj.at("session").get<std::string>();
    ss.token = sj.at("token").get<std::string>();
    ss.assignment = sj.at("assignment").get<std::size_t>();
    ss.participant = sj.at("participant").get<std::string>();
    ss.next_page = sj.at("next_page").get<std::size_t>();
    ss.slots_done = sj.at("slots_done").get<std::set<std::size_t>>();
    ss.completed = sj.at("completed").get<bool>();
    ss.created_ms = sj.at("created_ms").get<std::int64_t>();
    s.tokens[ss.token] = ss.session;
    s.sessions[ss.session] = std::move(ss);
  }
  for (const auto& r : j.at("responses")) s.responses.push_back(response_from_json(r));
  s.response_keys = j.at("response_keys").get<std::map<std::string, std::size_t>>();
  s.demographics = j.at("demographics").get<std::map<std::string, nlohmann::json>>();
  for (const auto& f : j.at("load_failures"))
    s.load_failures.push_back({f.at("participant").get<std::string>(), f.at("page").get<std::size_t>(), f.at("timestamp_ms").get<std::int64_t>()});
  return s;
}

class Store {
 public:
  /// Opens (or creates) a store directory and replays it.
  explicit Store(std::filesystem::path dir, std::size_t snapshot_every = 200)
      : dir_(std::move(dir)), snapshot_every_(snapshot_every) {
    std::filesystem::create_directories(dir_);
    recover();
    fd_ = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw StoreError("cannot open record log " + log_path().string());
  }

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  ~Store() {
    if (fd_ >= 0) ::close(fd_);
  }

  /// Persists a record (assigning its sequence number), then applies it.
  /// The hook runs between the two steps; tests use it to simulate a crash
  /// after the write reached disk but before anything was acknowledged.
  void append(nlohmann::json record) {
    std::lock_guard lock(mutex_);
    record["seq"] = state_.last_seq + 1;
    const std::string line = record.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) throw StoreError("write to record log failed");
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw StoreError("fsync of record log failed");
    if (after_persist_) after_persist_(record);
    apply_record(state_, record);
    if (snapshot_every_ > 0 && ++since_snapshot_ >= snapshot_every_) {
      write_snapshot();
      since_snapshot_ = 0;
    }
  }

  /// Read access under the store lock.
  template <typename F>
  auto read(F&& f) const {
    std::lock_guard lock(mutex_);
    return f(state_);
  }

  StoreState state() const {
    std::lock_guard lock(mutex_);
    return state_;
  }

  void set_after_persist(std::function<void(const nlohmann::json&)> hook) {
    std::lock_guard lock(mutex_);
    after_persist_ = std::move(hook);
  }

  void snapshot() {
    std::lock_guard lock(mutex_);
    write_snapshot();
    since_snapshot_ = 0;
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path log_path() const { return dir_ / "records.jsonl"; }
  std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

 private:
  void recover() {
    if (std::filesystem::exists(snapshot_path())) {
      std::ifstream in(snapshot_path());
      try {
        state_ = state_from_json(nlohmann::json::parse(in));
      } catch (const std::exception& e) {
        throw StoreError(std::string("corrupt snapshot: ") + e.what());
      }
    }
    std::ifstream in(log_path());
    std::string line;
    std::size_t lineno = 0;
    std::uintmax_t good_bytes = 0;
    bool torn = false;
    while (std::getline(in, line)) {
      ++lineno;
      const bool terminated = !in.eof();
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        // Only a final, unterminated line can be a torn write.
        if (!terminated) {
          torn = true;
          break;
        }
        throw StoreError("corrupt record log at line " + std::to_string(lineno));
      }
      if (!terminated) {
        torn = true;
        break;
      }
      good_bytes += line.size() + 1;
      if (rec.at("seq").get<std::uint64_t>() <= state_.last_seq) continue;
      apply_record(state_, rec);
    }
    if (torn) std::filesystem::resize_file(log_path(), good_bytes);
  }

  void write_snapshot() {
    const auto tmp = dir_ / "snapshot.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << state_to_json(state_).dump();
      if (!out) throw StoreError("cannot write snapshot");
    }
    const int fd = ::open(tmp.c_str(), O_RDONLY);
    if (fd >= 0) {
      ::fsync(fd);
      ::close(fd);
    }
    std::filesystem::rename(tmp, snapshot_path());
  }

  std::filesystem::path dir_;
  std::size_t snapshot_every_;
  std::size_t since_snapshot_ = 0;
  int fd_ = -1;
  mutable std::mutex mutex_;
  StoreState state_;
  std::function<void(const nlohmann::json&)> after_persist_;
};

}  // namespace genea::harness
