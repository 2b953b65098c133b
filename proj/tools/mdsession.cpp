// Command-line front end: ingest, sessions, patterns, stats, compare, substitution, sweep, generate.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "mdsession/commands.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

struct Flags {
  std::vector<std::string> inputs;
  std::string mode, format, grid, evening, out, offsets, start_date, end_date, resize_mode, coverage, spec, config;
  std::int64_t tw = 0;
  double trim = 0, alpha = 0, threshold = 0;
  std::size_t boot = 0, top = 0;
  std::uint64_t seed = 0;
  int min_active_days = 0;
  std::vector<unsigned> groups;
  std::vector<std::string> apps;
  double nmd_sp = 0, md_sp = 0, md_tab = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multidevice usage session analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  std::map<std::string, CLI::Option*> opt;
  opt["input"] = app.add_option("--input,-i", f.inputs, "input file (repeatable)");
  opt["mode"] = app.add_option("--mode", f.mode, "input mode: events or sessions");
  opt["format"] = app.add_option("--format", f.format, "event format: auto, jsonl or csv");
  opt["tw"] = app.add_option("--tw", f.tw, "timeout window in seconds (default 60)");
  opt["grid"] = app.add_option("--grid", f.grid, "comma-separated timeout grid for the sweep");
  opt["trim"] = app.add_option("--trim", f.trim, "trim proportion (default 0.2)");
  opt["boot"] = app.add_option("--boot", f.boot, "bootstrap replicates (default 2000)");
  opt["seed"] = app.add_option("--seed", f.seed, "master seed");
  opt["alpha"] = app.add_option("--alpha", f.alpha, "significance level (default 0.05)");
  opt["evening"] = app.add_option("--evening", f.evening, "daily window for the paired comparison, HH:MM-HH:MM");
  opt["threshold"] = app.add_option("--threshold", f.threshold, "item inclusion threshold (default 0.5)");
  opt["out"] = app.add_option("--out,-o", f.out, "output directory");
  opt["offsets"] = app.add_option("--offsets", f.offsets, "CSV of user_id,utc_offset_seconds");
  opt["min_active_days"] = app.add_option("--min-active-days", f.min_active_days, "activity span rule in days (default 23)");
  opt["start_date"] = app.add_option("--start-date", f.start_date, "panel window start YYYY-MM-DD");
  opt["end_date"] = app.add_option("--end-date", f.end_date, "panel window end YYYY-MM-DD");
  opt["resize_mode"] = app.add_option("--resize-mode", f.resize_mode, "stretch (default) or downsample");
  opt["coverage"] = app.add_option("--coverage", f.coverage, "half_open (default) or closed");
  opt["groups"] = app.add_option("--groups", f.groups, "prototype groups for category contrasts")->delimiter(',');
  opt["top"] = app.add_option("--top", f.top, "rows in the group ranking (default 10)");
  opt["apps"] = app.add_option("--apps", f.apps, "named apps for the share report")->delimiter(',');
  opt["spec"] = app.add_option("--spec", f.spec, "generator spec (JSON)");
  opt["nmd_sp"] = app.add_option("--nmd-smartphone", f.nmd_sp, "trimmed mean smartphone minutes/day, smartphone-only users");
  opt["md_sp"] = app.add_option("--md-smartphone", f.md_sp, "trimmed mean smartphone minutes/day, multidevice users");
  opt["md_tab"] = app.add_option("--md-tablet", f.md_tab, "trimmed mean tablet minutes/day, multidevice users");
  opt["config"] = app.add_option("--config", f.config, "JSON config file (default: $MDSESSION_CONFIG)");

  std::map<std::string, CLI::App*> sub;
  for (const char* name : {"ingest", "sessions", "patterns", "stats", "compare", "substitution", "sweep", "generate"})
    sub[name] = app.add_subcommand(name);
  sub["ingest"]->description("pair events into normalized app sessions");
  sub["sessions"]->description("build usage and multidevice sessions");
  sub["patterns"]->description("prototype groups and category contrasts");
  sub["stats"]->description("descriptive tables, CDFs, hourly shares and sweep");
  sub["compare"]->description("robust test battery");
  sub["substitution"]->description("substitution vs novel usage split");
  sub["sweep"]->description("timeout window sweep");
  sub["generate"]->description("synthetic event log from a spec");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto given = [&](const char* k) { return opt.at(k)->count() > 0; };
  mdsession::RunConfig cfg;
  try {
    std::string config_path = f.config;
    if (!given("config"))
      if (const char* env = std::getenv("MDSESSION_CONFIG"); env && *env) config_path = env;
    if (!config_path.empty()) {
      const std::string content = mdsession::read_file(config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(content);
      } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
      }
      mdsession::apply_config_json(cfg, j);
    }
    if (given("input")) cfg.inputs = f.inputs;
    if (given("mode")) cfg.mode = mdsession::parse_input_mode(f.mode);
    if (given("format")) cfg.format = f.format;
    if (given("tw")) cfg.tw = f.tw;
    if (given("grid")) cfg.grid = mdsession::parse_grid(f.grid);
    if (given("trim")) cfg.trim = f.trim;
    if (given("boot")) cfg.boot = f.boot;
    if (given("seed")) cfg.seed = f.seed;
    if (given("alpha")) cfg.alpha = f.alpha;
    if (given("evening")) cfg.evening = f.evening;
    if (given("threshold")) cfg.threshold = f.threshold;
    if (given("out")) cfg.out = f.out;
    if (given("offsets")) cfg.offsets = f.offsets;
    if (given("min_active_days")) cfg.min_active_days = f.min_active_days;
    if (given("start_date")) cfg.start_date = f.start_date;
    if (given("end_date")) cfg.end_date = f.end_date;
    if (given("resize_mode")) cfg.resize_mode = mdsession::parse_resize_mode(f.resize_mode);
    if (given("coverage")) cfg.coverage = mdsession::parse_coverage(f.coverage);
    if (given("groups")) cfg.contrast_groups = f.groups;
    if (given("top")) cfg.top_groups = f.top;
    if (given("apps")) cfg.named_apps = f.apps;
    if (given("spec")) cfg.spec = f.spec;
    if (given("nmd_sp")) cfg.nmd_smartphone = f.nmd_sp;
    if (given("md_sp")) cfg.md_smartphone = f.md_sp;
    if (given("md_tab")) cfg.md_tablet = f.md_tab;

    if (sub["ingest"]->parsed()) return mdsession::cmd_ingest(cfg);
    if (sub["sessions"]->parsed()) return mdsession::cmd_sessions(cfg);
    if (sub["patterns"]->parsed()) return mdsession::cmd_patterns(cfg);
    if (sub["stats"]->parsed()) return mdsession::cmd_stats(cfg);
    if (sub["compare"]->parsed()) return mdsession::cmd_compare(cfg);
    if (sub["substitution"]->parsed()) return mdsession::cmd_substitution(cfg);
    if (sub["sweep"]->parsed()) return mdsession::cmd_sweep(cfg);
    if (sub["generate"]->parsed())
      return mdsession::cmd_generate(cfg, given("seed") ? std::optional<std::uint64_t>(f.seed) : std::nullopt);
  } catch (const mdsession::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const mdsession::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
