#pragma once

// HTTP study service. Payloads are blinded: media are addressed by opaque ids
// and no condition label, matched side or segment name leaves the server.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "genea/design.hpp"
#include "genea/harness/config.hpp"
#include "genea/harness/store.hpp"
#include "genea/stats/responses.hpp"
#include "httplib.h"
#include "json.hpp"

namespace genea::harness {

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline constexpr const char* kHumanlikenessQuestion = "How human-like does the gesture motion appear?";
inline constexpr const char* kAppropriatenessQuestion =
    "Please indicate which character's motion best matches the speech, both in terms of rhythm and intonation and "
    "in terms of meaning.";
inline constexpr const char* kBrokenCheckText = "Attention! Please report this video as broken";

/// Outcome of a service call: HTTP status plus JSON body.
struct Reply {
  int status = 200;
  nlohmann::json body;

  static Reply error(int status, const std::string& message) { return {status, {{"error", message}}}; }
};

class StudyService {
 public:
  StudyService(StudyConfig config, StudyDesign design, Store& store, Clock clock = system_clock_ms)
      : config_(std::move(config)), design_(std::move(design)), store_(store), clock_(std::move(clock)) {
    for (const auto& a : design_.participants) {
      for (const auto& p : a.humanlikeness_pages) {
        for (const auto& s : p.slots) register_media(config_.matched_video(s.condition, p.segment));
      }
      for (const auto& p : a.appropriateness_pages) {
        register_media(config_.matched_video(p.condition, p.segment));
        register_media(config_.mismatched_video(p.condition, p.segment));
      }
    }
    if (!config_.service.attention_audio.empty()) register_media(config_.service.attention_audio);
  }

  const StudyDesign& design() const { return design_; }

  std::size_t page_count(const ParticipantAssignment& a) const { return a.page_count(); }

  Reply open_session(const std::string& token) {
    if (token.empty()) return Reply::error(400, "missing token");
    std::lock_guard lock(mutex_);
    const auto [used, count] = store_.read([&](const StoreState& s) { return std::pair{s.tokens.count(token) > 0, s.sessions.size()}; });
    if (used) return Reply::error(409, "token already used");
    if (count >= design_.participants.size()) return Reply::error(503, "all assignments are taken");
    const auto session = new_session_id();
    store_.append({{"type", "session"},
                   {"session", session},
                   {"token", token},
                   {"assignment", count},
                   {"participant", design_.participants[count].participant},
                   {"created_ms", clock_()}});
    return page_reply(session);
  }

  Reply resume_session(const std::string& session) {
    std::lock_guard lock(mutex_);
    return page_reply(session);
  }

  Reply submit(const nlohmann::json& body) {
    std::lock_guard lock(mutex_);
    std::string session;
    std::size_t page = 0;
    std::size_t slot = 0;
    std::string kind;
    try {
      session = body.at("session").get<std::string>();
      page = body.at("page").get<std::size_t>();
      slot = body.value("slot", std::size_t{0});
      kind = body.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return Reply::error(400, "response needs session, page and kind");
    }
    const auto ss = find_session(session);
    if (!ss) return Reply::error(404, "unknown session");
    const std::string key = session + ":" + std::to_string(page) + ":" + std::to_string(slot);
    const bool duplicate = store_.read([&](const StoreState& s) { return s.response_keys.count(key) > 0; });
    if (duplicate) return {200, progress_body(*find_session(session), true)};
    if (ss->completed) return Reply::error(409, "session already completed");
    if (page != ss->next_page) return Reply::error(409, "page " + std::to_string(page) + " is not the current page (" + std::to_string(ss->next_page) + ")");

    const auto& a = design_.participants[ss->assignment];
    const bool last_page = page + 1 == a.page_count();
    const auto now = clock_();

    if (kind == "load_failure") {
      store_.append({{"type", "progress"}, {"session", session}, {"advance", true}, {"complete", last_page}, {"timestamp_ms", now}});
      return {200, progress_body(*find_session(session), false)};
    }

    stats::Response r;
    r.study_id = design_.study_id;
    r.participant = ss->participant;
    r.page = page;
    r.slot = slot;
    r.timestamp_ms = now;
    bool advance = true;
    if (design_.study == StudyType::kHumanlikeness) {
      const auto& p = a.humanlikeness_pages.at(page);
      if (slot >= p.slots.size()) return Reply::error(400, "slot out of range");
      if (kind != "rating") return Reply::error(400, "rating pages accept only ratings");
      if (!body.contains("value") || !body["value"].is_number_integer()) return Reply::error(400, "rating needs an integer value");
      const int v = body["value"].get<int>();
      if (v < 0 || v > 100) return Reply::error(400, "rating outside 0..100");
      r.kind = stats::ResponseKind::kRating;
      r.rating = v;
      r.condition = p.slots[slot].is_check() ? stats::kAttentionCheckCondition : p.slots[slot].condition;
      r.segment = p.segment;
      advance = ss->slots_done.size() + 1 == p.slots.size();
    } else {
      const auto& p = a.appropriateness_pages.at(page);
      if (slot != 0) return Reply::error(400, "preference pages have a single slot 0");
      r.condition = p.attention != AttentionKind::kNone && !p.training ? stats::kAttentionCheckCondition : p.condition;
      r.segment = p.segment;
      if (kind == "preference") {
        const auto choice = body.value("choice", std::string());
        r.kind = stats::ResponseKind::kPreference;
        if (choice == "equal") {
          r.choice = stats::Choice::kTie;
        } else if (choice == "left" || choice == "right") {
          r.choice = parse_side(choice) == p.matched_side ? stats::Choice::kMatched : stats::Choice::kMismatched;
        } else {
          return Reply::error(400, "choice must be left, right or equal");
        }
      } else if (kind == "broken") {
        const auto shown = shown_.find(session);
        if (shown == shown_.end() || shown->second.first != page) return Reply::error(409, "page has not been served");
        if (now - shown->second.second < config_.service.broken_delay_ms)
          return Reply::error(422, "broken report before the " + std::to_string(config_.service.broken_delay_ms) + " ms delay");
        r.kind = stats::ResponseKind::kBroken;
        r.reported_broken = true;
      } else {
        return Reply::error(400, "preference pages accept preference or broken");
      }
    }
    store_.append({{"type", "response"},
                   {"session", session},
                   {"key", key},
                   {"response", response_to_json(r)},
                   {"advance", advance},
                   {"complete", advance && last_page}});
    return {200, progress_body(*find_session(session), false)};
  }

  Reply demographics(const nlohmann::json& body) {
    std::lock_guard lock(mutex_);
    if (!body.contains("session") || !body.contains("answers") || !body["answers"].is_object())
      return Reply::error(400, "demographics need session and an answers object");
    const auto ss = find_session(body["session"].get<std::string>());
    if (!ss) return Reply::error(404, "unknown session");
    store_.append({{"type", "demographics"}, {"participant", ss->participant}, {"answers", body["answers"]}});
    return {200, {{"ok", true}}};
  }

  Reply progress(const std::string& session) {
    std::lock_guard lock(mutex_);
    const auto ss = find_session(session);
    if (!ss) return Reply::error(404, "unknown session");
    return {200, progress_body(*ss, false)};
  }

  std::optional<std::filesystem::path> media_path(const std::string& id) const {
    const auto it = media_.find(id);
    if (it == media_.end()) return std::nullopt;
    return it->second;
  }

  std::string media_id(const std::filesystem::path& p) const { return hex64(fnv1a(config_.service.completion_salt + "|" + p.string())); }

  std::string completion_code(const std::string& session) const {
    auto h = hex64(fnv1a(config_.service.completion_salt + "#" + session)).substr(0, 8);
    for (auto& c : h) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return h;
  }

  /// Registers the API routes (and an optional static directory for the rater UI).
  void mount(httplib::Server& server, const std::filesystem::path& static_dir = {}) {
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/api/session", [this, send](const httplib::Request& req, httplib::Response& res) {
      if (req.has_param("session")) return send(res, resume_session(req.get_param_value("session")));
      send(res, open_session(req.get_param_value("token")));
    });
    server.Get("/api/progress", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, progress(req.get_param_value("session")));
    });
    server.Post("/api/response", [this, send](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) return send(res, Reply::error(400, "body is not JSON"));
      send(res, submit(body));
    });
    server.Post("/api/demographics", [this, send](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) return send(res, Reply::error(400, "body is not JSON"));
      send(res, demographics(body));
    });
    server.Get(R"(/media/([0-9a-f]{16}))", [this, send](const httplib::Request& req, httplib::Response& res) {
      const auto path = media_path(req.matches[1]);
      std::ifstream in(path ? *path : std::filesystem::path(), std::ios::binary);
      if (!path || !in) return send(res, Reply::error(404, "media not available"));
      std::ostringstream bytes;
      bytes << in.rdbuf();
      res.set_content(bytes.str(), content_type(*path));
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, Reply::error(500, what));
    });
    if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
  }

 private:
  std::optional<SessionState> find_session(const std::string& session) const {
    return store_.read([&](const StoreState& s) -> std::optional<SessionState> {
      const auto it = s.sessions.find(session);
      if (it == s.sessions.end()) return std::nullopt;
      return it->second;
    });
  }

  void register_media(const std::filesystem::path& p) { media_.emplace(media_id(p), p); }

  std::string media_url(const std::filesystem::path& p) const { return "/media/" + media_id(p); }

  static std::string content_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".mp4") return "video/mp4";
    if (ext == ".webm") return "video/webm";
    if (ext == ".wav") return "audio/wav";
    if (ext == ".mp3") return "audio/mpeg";
    return "application/octet-stream";
  }

  std::string new_session_id() {
    std::random_device rd;
    std::string id;
    for (int i = 0; i < 2; ++i) id += hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    return id;
  }

  nlohmann::json progress_body(const SessionState& ss, bool duplicate) const {
    const auto& a = design_.participants[ss.assignment];
    nlohmann::json j{{"ok", true},
                     {"duplicate", duplicate},
                     {"session", ss.session},
                     {"next_page", ss.next_page},
                     {"page_count", a.page_count()},
                     {"completed", ss.completed},
                     {"progress", static_cast<double>(ss.next_page) / static_cast<double>(a.page_count())}};
    if (ss.completed) j["completion_code"] = completion_code(ss.session);
    return j;
  }

  Reply page_reply(const std::string& session) {
    const auto ss = find_session(session);
    if (!ss) return Reply::error(404, "unknown session");
    const auto& a = design_.participants[ss->assignment];
    nlohmann::json j = progress_body(*ss, false);
    if (ss->completed) return {200, j};
    const auto page = ss->next_page;
    auto& shown = shown_[session];
    if (shown.first != page || shown.second == 0) shown = {page, clock_()};
    j["page"] = page;
    j["study"] = to_string(design_.study);
    if (design_.study == StudyType::kHumanlikeness) {
      const auto& p = a.humanlikeness_pages.at(page);
      j["kind"] = p.training ? "training" : "humanlikeness";
      j["training"] = p.training;
      j["question"] = kHumanlikenessQuestion;
      j["answered_slots"] = ss->slots_done;
      nlohmann::json stimuli = nlohmann::json::array();
      for (std::size_t s = 0; s < p.slots.size(); ++s) {
        nlohmann::json st{{"slot", s}, {"media", media_url(config_.matched_video(p.slots[s].condition, p.segment))}};
        if (p.slots[s].is_check()) {
          st["overlay"] = {{"text", "Attention! You must rate this video " + std::to_string(*p.slots[s].attention_target)},
                           {"appear_ms", config_.service.attention_delay_ms}};
        }
        stimuli.push_back(st);
      }
      j["stimuli"] = stimuli;
    } else {
      const auto& p = a.appropriateness_pages.at(page);
      j["kind"] = p.training ? "training" : "appropriateness";
      j["training"] = p.training;
      j["question"] = kAppropriatenessQuestion;
      j["broken_delay_ms"] = config_.service.broken_delay_ms;
      const auto matched = media_url(config_.matched_video(p.condition, p.segment));
      const auto mismatched = media_url(config_.mismatched_video(p.condition, p.segment));
      nlohmann::json left{{"side", "left"}, {"media", p.matched_side == Side::kLeft ? matched : mismatched}};
      nlohmann::json right{{"side", "right"}, {"media", p.matched_side == Side::kLeft ? mismatched : matched}};
      if (!p.training && p.attention == AttentionKind::kVisual) {
        const nlohmann::json overlay{{"text", kBrokenCheckText}, {"appear_ms", config_.service.attention_delay_ms}};
        left["overlay"] = overlay;
        right["overlay"] = overlay;
      }
      j["stimuli"] = {left, right};
      if (!p.training && p.attention == AttentionKind::kAudio && !config_.service.attention_audio.empty())
        j["audio_override"] = {{"media", media_url(config_.service.attention_audio)}, {"appear_ms", config_.service.attention_delay_ms}};
    }
    return {200, j};
  }

  StudyConfig config_;
  StudyDesign design_;
  Store& store_;
  Clock clock_;
  std::mutex mutex_;
  std::map<std::string, std::filesystem::path> media_;
  std::map<std::string, std::pair<std::size_t, std::int64_t>> shown_;  // session -> (page, first served ms)
};

/// Runs a service on a background thread; stops on destruction.
class ServiceRunner {
 public:
  ServiceRunner(StudyService& service, const std::string& host = "127.0.0.1", int port = 0,
                const std::filesystem::path& static_dir = {}) {
    service.mount(server_, static_dir);
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~ServiceRunner() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace genea::harness
