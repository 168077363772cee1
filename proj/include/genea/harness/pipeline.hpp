#pragma once

// BVH directories -> pose sequences -> per-condition metric reports, plus the
// report writers and the metric-versus-rating rank-correlation table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "genea/bvh.hpp"
#include "genea/harness/config.hpp"
#include "genea/metrics.hpp"
#include "genea/motion.hpp"
#include "genea/stats/analysis.hpp"
#include "genea/stats/kendall.hpp"
#include "json.hpp"

namespace genea::harness {

namespace fs = std::filesystem;

struct LoadedCondition {
  std::vector<std::string> names;  // file stems, sorted
  std::vector<PoseSequence> sequences;
  std::vector<std::string> errors;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Loads every .bvh in dir (sorted by name). Files that fail to load are
/// listed in errors and skipped.
inline LoadedCondition load_condition(const fs::path& dir, Tier tier, const MetricsSettings& settings) {
  LoadedCondition out;
  if (dir.empty() || !fs::is_directory(dir)) {
    out.errors.push_back("motion directory '" + dir.string() + "' does not exist");
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bvh") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      auto clip = parse_bvh(read_file(f));
      if (settings.target_fps > 0) clip = resample(clip, settings.target_fps);
      if (settings.standardize_root) clip = standardize_root(clip);
      auto seq = forward_kinematics(clip);
      if (tier == Tier::kUpperBody) {
        const auto joints = upper_body_joints(clip.skeleton);
        seq = select_joints(seq, joints);
      }
      out.names.push_back(f.stem().string());
      out.sequences.push_back(std::move(seq));
    } catch (const std::exception& e) {
      out.errors.push_back(f.filename().string() + ": " + e.what());
    }
  }
  if (files.empty()) out.errors.push_back("motion directory '" + dir.string() + "' holds no .bvh files");
  return out;
}

struct MetricsRun {
  std::vector<MetricReport> reports;
  std::map<std::string, std::vector<std::string>> errors;  // condition -> problems

  bool ok() const { return errors.empty(); }
};

/// Computes a report for every condition against the reference condition.
/// Generated and reference segments are paired by file name.
inline MetricsRun run_metrics(const StudyConfig& config) {
  MetricsRun run;
  const auto ref_id = config.reference_condition();
  const auto ref = load_condition(config.condition(ref_id).motion, config.tier, config.metrics);
  if (!ref.errors.empty()) run.errors[ref_id] = ref.errors;
  if (ref.sequences.empty()) {
    run.errors[ref_id].push_back("reference condition has no usable segments");
    return run;
  }
  std::shared_ptr<const PcaFeatureExtractor> extractor;
  try {
    extractor = fit_feature_extractor(ref.sequences, config.metrics.metric.fgd_window, config.metrics.metric.fgd_dim);
  } catch (const std::exception& e) {
    run.errors[ref_id].push_back(std::string("feature extractor: ") + e.what());
    return run;
  }
  std::map<std::string, std::size_t> ref_index;
  for (std::size_t i = 0; i < ref.names.size(); ++i) ref_index[ref.names[i]] = i;

  for (const auto& c : config.conditions) {
    const auto loaded = c.id == ref_id ? ref : load_condition(c.motion, config.tier, config.metrics);
    auto& errs = run.errors[c.id];
    if (c.id != ref_id) errs.insert(errs.end(), loaded.errors.begin(), loaded.errors.end());
    std::vector<PoseSequence> gen;
    std::vector<PoseSequence> paired_ref;
    for (std::size_t i = 0; i < loaded.names.size(); ++i) {
      const auto it = ref_index.find(loaded.names[i]);
      if (it == ref_index.end()) {
        errs.push_back(loaded.names[i] + ": no reference segment with this name");
        continue;
      }
      gen.push_back(loaded.sequences[i]);
      paired_ref.push_back(ref.sequences[it->second]);
    }
    try {
      if (gen.empty()) throw MetricError("no usable segments");
      auto report = metric_report(c.id, gen, paired_ref, config.metrics.metric, *extractor);
      // Hellinger compares against the whole reference distribution.
      report.hellinger = hellinger(speed_histogram(gen, config.metrics.metric.hist_bin_width, config.metrics.metric.hist_max_speed),
                                   speed_histogram(ref.sequences, config.metrics.metric.hist_bin_width, config.metrics.metric.hist_max_speed));
      report.fgd = fgd(gen, ref.sequences, *extractor);
      run.reports.push_back(report);
    } catch (const std::exception& e) {
      errs.push_back(e.what());
    }
    if (errs.empty()) run.errors.erase(c.id);
  }
  return run;
}

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"condition", r.condition},
          {"segments", r.segments},
          {"avg_jerk", {{"mean", r.avg_jerk.mean}, {"sd", r.avg_jerk.sd}}},
          {"avg_accel", {{"mean", r.avg_accel.mean}, {"sd", r.avg_accel.sd}}},
          {"global_cca", r.global_cca},
          {"hellinger", r.hellinger},
          {"fgd", r.fgd}};
}

inline nlohmann::json metrics_json(const MetricsRun& run, const StudyConfig& config) {
  nlohmann::json j;
  j["reference"] = config.reference_condition();
  j["tier"] = to_string(config.tier);
  j["config"] = {{"target_fps", config.metrics.target_fps},
                 {"standardize_root", config.metrics.standardize_root},
                 {"hist_bin_width", config.metrics.metric.hist_bin_width},
                 {"hist_max_speed", config.metrics.metric.hist_max_speed},
                 {"cca_ridge", config.metrics.metric.cca_ridge},
                 {"cca", "first canonical correlation"},
                 {"fgd_window", config.metrics.metric.fgd_window},
                 {"fgd_dim", config.metrics.metric.fgd_dim},
                 {"fgd_features", "principal-component window projection"}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : run.reports) rows.push_back(to_json(r));
  j["conditions"] = rows;
  j["errors"] = run.errors;
  return j;
}

/// Tab-separated table with the same columns as the objective results table.
inline std::string metrics_tsv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "condition\tavg_jerk\tavg_jerk_sd\tavg_accel\tavg_accel_sd\tglobal_cca\thellinger\tfgd\n";
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s\t%.6g\t%.6g\t%.6g\t%.6g\t%.6f\t%.6f\t%.6g\n", r.condition.c_str(), r.avg_jerk.mean,
                  r.avg_jerk.sd, r.avg_accel.mean, r.avg_accel.sd, r.global_cca, r.hellinger, r.fgd);
    out << buf;
  }
  return out.str();
}

inline std::vector<MetricReport> metric_reports_from_json(const nlohmann::json& j) {
  std::vector<MetricReport> out;
  for (const auto& c : j.at("conditions")) {
    MetricReport r;
    r.condition = c.at("condition").get<std::string>();
    r.segments = c.value("segments", std::size_t{0});
    r.avg_jerk = {c.at("avg_jerk").at("mean").get<double>(), c.at("avg_jerk").at("sd").get<double>()};
    r.avg_accel = {c.at("avg_accel").at("mean").get<double>(), c.at("avg_accel").at("sd").get<double>()};
    r.global_cca = c.at("global_cca").get<double>();
    r.hellinger = c.at("hellinger").get<double>();
    r.fgd = c.at("fgd").get<double>();
    out.push_back(r);
  }
  return out;
}

struct ValidationRow {
  std::string metric;
  std::string versus;  // "humanlikeness" or "appropriateness"
  stats::RankCorrelationResult result;
};

namespace detail {

inline double metric_value(const MetricReport& r, const std::string& metric) {
  if (metric == "avg_jerk") return r.avg_jerk.mean;
  if (metric == "avg_accel") return r.avg_accel.mean;
  if (metric == "global_cca") return r.global_cca;
  if (metric == "hellinger") return r.hellinger;
  if (metric == "fgd") return r.fgd;
  throw std::invalid_argument("unknown metric " + metric);
}

}  // namespace detail

/// Kendall correlations of each metric's distance from the reference against a
/// per-condition score (median rating or split-tie percent matched).
inline std::vector<ValidationRow> metric_validation_table(const std::vector<MetricReport>& reports, const std::string& reference,
                                                          const std::map<std::string, double>& scores, const std::string& versus,
                                                          const std::vector<std::string>& metrics = {"avg_jerk", "avg_accel", "global_cca", "hellinger", "fgd"}) {
  const MetricReport* ref = nullptr;
  for (const auto& r : reports) {
    if (r.condition == reference) ref = &r;
  }
  if (!ref) throw std::invalid_argument("no metric report for the reference condition " + reference);
  std::vector<ValidationRow> rows;
  for (const auto& m : metrics) {
    std::vector<double> values;
    std::vector<double> y;
    for (const auto& r : reports) {
      if (r.condition == reference) continue;
      const auto it = scores.find(r.condition);
      if (it == scores.end()) continue;
      values.push_back(detail::metric_value(r, m));
      y.push_back(it->second);
    }
    std::optional<double> ref_score;
    if (const auto it = scores.find(reference); it != scores.end()) ref_score = it->second;
    stats::MetricValidationOptions opt;
    opt.include_reference = ref_score.has_value();
    rows.push_back({m, versus, stats::metric_validation(values, detail::metric_value(*ref, m), y, ref_score, opt)});
  }
  return rows;
}

inline nlohmann::json to_json(const std::vector<ValidationRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"metric", r.metric},
                 {"versus", r.versus},
                 {"tau", r.result.defined ? nlohmann::json(r.result.tau) : nlohmann::json()},
                 {"p_value", r.result.defined ? nlohmann::json(r.result.p_value) : nlohmann::json()},
                 {"n", r.result.n},
                 {"exact", r.result.exact}});
  }
  return j;
}

}  // namespace genea::harness
