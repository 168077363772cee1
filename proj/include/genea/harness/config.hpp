#pragma once

// Study configuration: a JSON document. Relative paths resolve against the
// directory holding the config file.
//
// {
//   "study_id": "fb-hl",
//   "study": "humanlikeness" | "appropriateness",
//   "tier": "full-body" | "upper-body",
//   "conditions": [{"id": "FNA", "videos": "videos/FNA", "motion": "bvh/FNA"}, ...],
//   "segments": ["seg01", ...]                 (or "segment_list": "segments.csv"),
//   "participants": 121,
//   "seed": 2022,
//   "alpha": 0.05,
//   "compensation": "free text",
//   "reference": "FNA",                       (metrics reference, default: natural condition)
//   "metrics": {"target_fps": 30, "standardize_root": false, "hist_bin_width": 1, "hist_max_speed": 500,
//               "cca_ridge": 1e-6, "fgd_window": 34, "fgd_dim": 32},
//   "service": {"store": "store", "snapshot_every": 200, "broken_delay_ms": 5000,
//               "attention_delay_ms": 3000, "video_extension": ".mp4", "attention_audio": "check.wav",
//               "completion_salt": "..."}
// }
//
// Stimulus files: <videos>/<segment><ext> for matched videos and
// <videos>/<segment>.mismatched<ext> for the mismatched video played with the
// speech of <segment>.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "genea/design.hpp"
#include "genea/metrics.hpp"
#include "genea/motion.hpp"
#include "json.hpp"

namespace genea::harness {

namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConditionSource {
  std::string id;
  fs::path videos;
  fs::path motion;
};

struct MetricsSettings {
  double target_fps = 30.0;
  bool standardize_root = false;
  MetricConfig metric;
};

struct ServiceSettings {
  fs::path store = "store";
  std::size_t snapshot_every = 200;
  std::int64_t broken_delay_ms = 5000;
  std::int64_t attention_delay_ms = 3000;
  std::string video_extension = ".mp4";
  fs::path attention_audio;
  std::string completion_salt = "genea";
};

struct StudyConfig {
  std::string study_id = "study";
  StudyType study = StudyType::kHumanlikeness;
  Tier tier = Tier::kFullBody;
  std::vector<ConditionSource> conditions;
  std::vector<std::string> segments;
  std::size_t participants = 1;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::string compensation;
  std::string reference;
  MetricsSettings metrics;
  ServiceSettings service;

  std::vector<std::string> condition_ids() const {
    std::vector<std::string> out;
    for (const auto& c : conditions) out.push_back(c.id);
    return out;
  }

  const ConditionSource& condition(const std::string& id) const {
    for (const auto& c : conditions) {
      if (c.id == id) return c;
    }
    throw ConfigError("unknown condition '" + id + "'");
  }

  /// Reference condition for the objective metrics.
  std::string reference_condition() const {
    if (!reference.empty()) return reference;
    for (const auto& c : conditions) {
      if (Condition::parse(c.id).kind == ConditionKind::kNatural) return c.id;
    }
    throw ConfigError("no reference condition");
  }

  DesignParams design_params() const {
    DesignParams p;
    p.study_id = study_id;
    p.tier = tier;
    p.conditions = condition_ids();
    p.segments = segments;
    p.n_participants = participants;
    p.seed = seed;
    return p;
  }

  fs::path matched_video(const std::string& condition_id, const std::string& segment) const {
    return condition(condition_id).videos / (segment + service.video_extension);
  }

  fs::path mismatched_video(const std::string& condition_id, const std::string& segment) const {
    return condition(condition_id).videos / (segment + ".mismatched" + service.video_extension);
  }
};

inline StudyConfig config_from_json(const nlohmann::json& j, const fs::path& base = ".") {
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  try {
    StudyConfig c;
    c.study_id = j.value("study_id", std::string("study"));
    c.study = parse_study_type(j.value("study", std::string("humanlikeness")));
    c.tier = parse_tier(j.value("tier", std::string("full-body")));
    for (const auto& cj : j.at("conditions")) {
      ConditionSource s;
      if (cj.is_string()) {
        s.id = cj.get<std::string>();
      } else {
        s.id = cj.at("id").get<std::string>();
        s.videos = resolve(cj.value("videos", std::string()));
        s.motion = resolve(cj.value("motion", std::string()));
      }
      Condition::parse(s.id);
      c.conditions.push_back(std::move(s));
    }
    if (j.contains("segments")) c.segments = j.at("segments").get<std::vector<std::string>>();
    if (j.contains("segment_list")) {
      const auto list = resolve(j.at("segment_list").get<std::string>());
      std::ifstream in(list);
      if (!in) throw ConfigError("cannot open segment list " + list.string());
      for (const auto& s : read_segment_list(in)) c.segments.push_back(s.source_take);
    }
    c.participants = j.value("participants", std::size_t{1});
    c.seed = j.value("seed", std::uint64_t{0});
    c.alpha = j.value("alpha", 0.05);
    c.compensation = j.value("compensation", std::string());
    c.reference = j.value("reference", std::string());
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      c.metrics.target_fps = m.value("target_fps", c.metrics.target_fps);
      c.metrics.standardize_root = m.value("standardize_root", c.metrics.standardize_root);
      c.metrics.metric.hist_bin_width = m.value("hist_bin_width", c.metrics.metric.hist_bin_width);
      c.metrics.metric.hist_max_speed = m.value("hist_max_speed", c.metrics.metric.hist_max_speed);
      c.metrics.metric.cca_ridge = m.value("cca_ridge", c.metrics.metric.cca_ridge);
      c.metrics.metric.fgd_window = m.value("fgd_window", c.metrics.metric.fgd_window);
      c.metrics.metric.fgd_dim = m.value("fgd_dim", c.metrics.metric.fgd_dim);
    }
    if (j.contains("service")) {
      const auto& s = j.at("service");
      c.service.store = resolve(s.value("store", std::string("store")));
      c.service.snapshot_every = s.value("snapshot_every", c.service.snapshot_every);
      c.service.broken_delay_ms = s.value("broken_delay_ms", c.service.broken_delay_ms);
      c.service.attention_delay_ms = s.value("attention_delay_ms", c.service.attention_delay_ms);
      c.service.video_extension = s.value("video_extension", c.service.video_extension);
      c.service.attention_audio = resolve(s.value("attention_audio", std::string()));
      c.service.completion_salt = s.value("completion_salt", c.service.completion_salt);
    } else {
      c.service.store = base / "store";
    }
    if (c.conditions.empty()) throw ConfigError("config lists no conditions");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const DesignError& e) {
    throw ConfigError(e.what());
  }
}

inline StudyConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

/// (condition, segment) pairs the design assigns but whose video file is missing.
inline std::vector<std::string> stimulus_coverage_errors(const StudyConfig& config, const StudyDesign& design) {
  std::set<std::pair<std::string, std::string>> needed;
  std::set<std::pair<std::string, std::string>> needed_mismatched;
  for (const auto& a : design.participants) {
    for (const auto& p : a.humanlikeness_pages) {
      for (const auto& s : p.slots) needed.insert({s.condition, p.segment});
    }
    for (const auto& p : a.appropriateness_pages) {
      needed.insert({p.condition, p.segment});
      needed_mismatched.insert({p.condition, p.segment});
    }
  }
  std::vector<std::string> errors;
  for (const auto& [c, s] : needed) {
    if (!fs::exists(config.matched_video(c, s))) errors.push_back("missing video for (" + c + ", " + s + "): " + config.matched_video(c, s).string());
  }
  for (const auto& [c, s] : needed_mismatched) {
    if (!fs::exists(config.mismatched_video(c, s)))
      errors.push_back("missing mismatched video for (" + c + ", " + s + "): " + config.mismatched_video(c, s).string());
  }
  return errors;
}

}  // namespace genea::harness
