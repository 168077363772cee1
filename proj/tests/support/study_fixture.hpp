#pragma once

// Throwaway study directories: config.json, placeholder stimulus videos and
// optional BVH motion per condition.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genea/bvh.hpp"
#include "genea/design.hpp"
#include "genea/harness/config.hpp"

namespace genea::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("genea-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> full_body_conditions() {
  return {"FNA", "FSA", "FSB", "FSC", "FSD", "FSF", "FSG", "FSH", "FSI", "FBT"};
}

inline std::vector<std::string> numbered_segments(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 1; i <= n; ++i) v.push_back("seg" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  return v;
}

struct StudySpec {
  std::string study_id = "test-study";
  StudyType study = StudyType::kHumanlikeness;
  std::vector<std::string> conditions = full_body_conditions();
  std::size_t segments = 48;
  std::size_t participants = 4;
  std::uint64_t seed = 7;
  std::int64_t broken_delay_ms = 5000;
  bool write_videos = true;
};

/// Writes a study directory and returns the path of its config file.
inline std::filesystem::path write_study(const std::filesystem::path& root, const StudySpec& spec) {
  namespace fs = std::filesystem;
  const auto segments = numbered_segments(spec.segments);
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : spec.conditions) {
    conds.push_back({{"id", c}, {"videos", "videos/" + c}, {"motion", "bvh/" + c}});
    fs::create_directories(root / "videos" / c);
    if (!spec.write_videos) continue;
    for (const auto& s : segments) {
      std::ofstream(root / "videos" / c / (s + ".mp4")) << c << ' ' << s;
      std::ofstream(root / "videos" / c / (s + ".mismatched.mp4")) << c << ' ' << s << " mismatched";
    }
  }
  std::ofstream(root / "check.wav") << "attention";
  const nlohmann::json config{{"study_id", spec.study_id},
                              {"study", to_string(spec.study)},
                              {"tier", "full-body"},
                              {"conditions", conds},
                              {"segments", segments},
                              {"participants", spec.participants},
                              {"seed", spec.seed},
                              {"alpha", 0.05},
                              {"compensation", "test"},
                              {"metrics", {{"target_fps", 30}, {"fgd_window", 10}, {"fgd_dim", 8}}},
                              {"service",
                               {{"store", "store"},
                                {"snapshot_every", 50},
                                {"broken_delay_ms", spec.broken_delay_ms},
                                {"attention_delay_ms", 3000},
                                {"attention_audio", "check.wav"},
                                {"completion_salt", "salt"}}}};
  std::ofstream(root / "config.json") << config.dump(2);
  return root / "config.json";
}

/// Writes each clip as <root>/bvh/<condition>/<name>.bvh.
inline void write_motion(const std::filesystem::path& root, const std::string& condition, const std::string& name,
                         const MotionClip& clip) {
  const auto dir = root / "bvh" / condition;
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (name + ".bvh")) << write_bvh(clip);
}

}  // namespace genea::testing
