// Command-line entry points: metrics, design, analyze, serve, export.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "genea/design.hpp"
#include "genea/harness/config.hpp"
#include "genea/harness/export.hpp"
#include "genea/harness/pipeline.hpp"
#include "genea/harness/service.hpp"
#include "genea/harness/store.hpp"
#include "genea/stats/analysis.hpp"
#include "genea/stats/screening.hpp"

namespace fs = std::filesystem;
using namespace genea;

namespace {

std::atomic<bool> g_stop{false};

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

harness::StudyConfig load(const std::string& path, const std::string& tier, std::optional<std::uint64_t> seed) {
  auto c = harness::load_config(path);
  if (!tier.empty()) c.tier = parse_tier(tier);
  if (seed) c.seed = *seed;
  return c;
}

StudyDesign read_design(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open design " + p.string());
  return design_from_json(nlohmann::json::parse(in));
}

int cmd_metrics(const std::string& config_path, const std::string& tier, const fs::path& out) {
  const auto config = load(config_path, tier, std::nullopt);
  const auto run = harness::run_metrics(config);
  write_text(out / "metrics.json", harness::metrics_json(run, config).dump(2) + "\n");
  write_text(out / "metrics.tsv", harness::metrics_tsv(run.reports));
  std::cout << harness::metrics_tsv(run.reports);
  for (const auto& [c, errs] : run.errors) {
    for (const auto& e : errs) std::cerr << c << ": " << e << "\n";
  }
  return run.ok() ? 0 : 1;
}

int cmd_design(const std::string& config_path, const std::string& tier, std::optional<std::uint64_t> seed, const fs::path& out,
               bool skip_coverage) {
  const auto config = load(config_path, tier, seed);
  const auto params = config.design_params();
  const auto design = config.study == StudyType::kHumanlikeness ? design_humanlikeness(params) : design_appropriateness(params);
  int status = 0;
  for (const auto& v : validate_design(design)) {
    std::cerr << "design violation at " << v.location << ": " << v.message << "\n";
    status = 1;
  }
  if (!skip_coverage) {
    for (const auto& e : harness::stimulus_coverage_errors(config, design)) {
      std::cerr << e << "\n";
      status = 1;
    }
  }
  write_text(out, to_json(design).dump(1) + "\n");
  if (design.study == StudyType::kHumanlikeness)
    std::cerr << "minimum pair co-occurrence: " << min_pair_cooccurrence(design) << "\n";
  return status;
}

int cmd_analyze(const fs::path& design_path, const fs::path& responses_path, const std::string& metrics_path, const fs::path& out) {
  const auto design = read_design(design_path);
  std::ifstream in(responses_path);
  if (!in) throw std::runtime_error("cannot open responses " + responses_path.string());
  const auto rows = stats::read_responses_csv(in);
  if (rows.empty()) throw stats::StatsError("no responses in " + responses_path.string());
  const auto screened = stats::screen_participants(design, rows);

  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : screened.log) {
    log.push_back({{"participant", e.participant},
                   {"failed_checks", e.failed_checks},
                   {"broken_on_scored_pages", e.broken_on_scored},
                   {"excluded", e.excluded},
                   {"reason", e.reason}});
  }
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : screened.rejected) rejected.push_back({{"row", r.index + 2}, {"participant", r.participant}, {"reason", r.reason}});
  write_text(out / "screening.json", nlohmann::json{{"included", screened.included}, {"participants", log}, {"rejected_rows", rejected}}.dump(2) + "\n");
  for (const auto& r : screened.rejected) std::cerr << "rejected row " << r.index + 2 << " (" << r.participant << "): " << r.reason << "\n";

  const auto report = stats::analyze_study(design, screened.analysis);
  auto j = to_json(report);
  j["screening"] = {{"included", screened.included.size()}, {"excluded", screened.excluded_count()}, {"rejected_rows", screened.rejected.size()}};
  if (!metrics_path.empty()) {
    std::ifstream min(metrics_path);
    if (!min) throw std::runtime_error("cannot open metric report " + metrics_path);
    const auto mj = nlohmann::json::parse(min);
    const auto reports = harness::metric_reports_from_json(mj);
    std::map<std::string, double> scores;
    std::string versus;
    if (report.study == StudyType::kHumanlikeness) {
      for (const auto& s : report.ratings) scores[s.condition] = s.median;
      versus = "humanlikeness";
    } else {
      for (const auto& s : report.preferences) scores[s.condition] = s.percent_matched;
      versus = "appropriateness";
    }
    const auto metrics = report.study == StudyType::kHumanlikeness
                             ? std::vector<std::string>{"avg_jerk", "avg_accel", "global_cca", "hellinger", "fgd"}
                             : std::vector<std::string>{"global_cca"};
    j["metric_validation"] = harness::to_json(harness::metric_validation_table(reports, mj.value("reference", design.natural()), scores, versus, metrics));
  }
  write_text(out / "report.json", j.dump(2) + "\n");
  const auto text = stats::format_report(report);
  write_text(out / "report.txt", text);
  std::cout << text;
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& tier, const fs::path& design_path, int port, const std::string& ui) {
  const auto config = load(config_path, tier, std::nullopt);
  const auto design = read_design(design_path);
  const auto violations = validate_design(design);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "design violation at " << v.location << ": " << v.message << "\n";
    return 1;
  }
  harness::Store store(config.service.store, config.service.snapshot_every);
  harness::StudyService service(config, design, store);
  httplib::Server server;
  service.mount(server, ui);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::thread watcher([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  std::cerr << "serving " << design.study_id << " on port " << port << "\n";
  const bool ok = server.listen("0.0.0.0", port);
  g_stop = true;
  watcher.join();
  store.snapshot();
  return ok ? 0 : 1;
}

int cmd_export(const fs::path& store_dir, const fs::path& out) {
  if (!fs::is_directory(store_dir)) throw std::runtime_error("store directory " + store_dir.string() + " does not exist");
  harness::Store store(store_dir, 0);
  harness::export_store(store.state(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gesture-generation evaluation harness"};
  app.require_subcommand(1);
  std::string config_path;
  std::string tier;
  std::string out;
  std::uint64_t seed = 0;

  auto* metrics = app.add_subcommand("metrics", "Objective metrics for every condition in a config");
  metrics->add_option("config,--config", config_path, "Study config (JSON)")->required();
  metrics->add_option("--tier", tier, "Override tier: full-body or upper-body");
  metrics->add_option("--out", out, "Output directory")->default_val("metrics-out");

  auto* design = app.add_subcommand("design", "Generate a balanced study design");
  bool skip_coverage = false;
  design->add_option("config,--config", config_path, "Study config (JSON)")->required();
  design->add_option("--tier", tier, "Override tier");
  auto* seed_opt = design->add_option("--seed", seed, "Override seed");
  design->add_option("--out", out, "Design JSON path")->default_val("design.json");
  design->add_flag("--skip-coverage", skip_coverage, "Do not check that stimulus videos exist");

  auto* analyze = app.add_subcommand("analyze", "Screen responses and compute the study statistics");
  std::string design_path;
  std::string responses_path;
  std::string metrics_path;
  analyze->add_option("design", design_path, "Design JSON")->required();
  analyze->add_option("responses", responses_path, "Responses CSV")->required();
  analyze->add_option("--metrics", metrics_path, "metrics.json to correlate against the ratings");
  analyze->add_option("--out", out, "Output directory")->default_val("analysis-out");

  auto* serve = app.add_subcommand("serve", "Serve a study over HTTP");
  int port = 8080;
  std::string ui;
  serve->add_option("config,--config", config_path, "Study config (JSON)")->required();
  serve->add_option("--design", design_path, "Design JSON")->required();
  serve->add_option("--port", port, "Port")->default_val(8080);
  serve->add_option("--tier", tier, "Override tier");
  serve->add_option("--ui", ui, "Static directory for the rater interface");

  auto* exp = app.add_subcommand("export", "Export responses and demographics from a store");
  std::string store_dir;
  exp->add_option("store,--store", store_dir, "Store directory")->required();
  exp->add_option("--out", out, "Output directory")->default_val("export-out");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*metrics) return cmd_metrics(config_path, tier, out);
    if (*design) return cmd_design(config_path, tier, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out, skip_coverage);
    if (*analyze) return cmd_analyze(design_path, responses_path, metrics_path, out);
    if (*serve) return cmd_serve(config_path, tier, design_path, port, ui);
    if (*exp) return cmd_export(store_dir, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
