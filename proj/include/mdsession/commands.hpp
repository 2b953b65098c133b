#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdsession/battery.hpp"
#include "mdsession/descriptive.hpp"
#include "mdsession/ingestion.hpp"
#include "mdsession/patterns.hpp"
#include "mdsession/robust.hpp"
#include "mdsession/sessions.hpp"
#include "mdsession/synthetic.hpp"

namespace mdsession {

enum class InputMode { events, sessions };

struct RunConfig {
  std::vector<std::string> inputs;
  InputMode mode = InputMode::events;
  std::string format = "auto";  // auto | jsonl | csv (events mode)
  Seconds tw = kDefaultTimeoutWindow;
  std::vector<Seconds> grid = default_sweep_grid();
  double trim = 0.2;
  std::size_t boot = 2000;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::string evening = "17:00-24:00";
  double threshold = 0.5;
  std::string out = "out";
  std::string offsets;  // CSV user_id,utc_offset_seconds
  int min_active_days = 23;
  std::string start_date;
  std::string end_date;
  ResizeMode resize_mode = ResizeMode::stretch_shorter;
  Coverage coverage = Coverage::half_open;
  std::vector<unsigned> contrast_groups;  // empty: the two most frequent groups
  std::size_t top_groups = 10;
  std::vector<std::string> named_apps;  // empty: most used apps
  std::string spec;                     // generator spec file
  std::optional<double> nmd_smartphone;
  std::optional<double> md_smartphone;
  std::optional<double> md_tablet;

  void validate() const {
    if (tw < 0) throw std::invalid_argument("tw must be >= 0");
    for (Seconds g : grid)
      if (g < 0) throw std::invalid_argument("sweep grid values must be >= 0");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must be in (0, 1]");
    if (min_active_days < 0) throw std::invalid_argument("min-active-days must be >= 0");
    if (boot < 1) throw std::invalid_argument("boot must be >= 1");
    if (out.empty()) throw std::invalid_argument("output directory must be set");
    trim_spec().validate();
    parse_day_window(evening);
    if (mode == InputMode::events && format != "auto" && format != "jsonl" && format != "csv")
      throw std::invalid_argument("format must be auto, jsonl or csv");
    for (unsigned g : contrast_groups)
      if (g >= kPrototypeCount) throw std::invalid_argument("contrast group ids must be < 256");
  }

  TrimSpec trim_spec() const { return {trim, boot, seed, alpha}; }

  PanelWindow window() const {
    PanelWindow w;
    if (!start_date.empty()) w.start_day = text::parse_date(start_date);
    if (!end_date.empty()) w.end_day = text::parse_date(end_date);
    w.min_active_span_days = min_active_days;
    w.validate();
    return w;
  }
};

inline std::string_view to_string(InputMode m) { return m == InputMode::events ? "events" : "sessions"; }
inline std::string_view to_string(ResizeMode m) { return m == ResizeMode::stretch_shorter ? "stretch" : "downsample"; }
inline std::string_view to_string(Coverage c) { return c == Coverage::half_open ? "half_open" : "closed"; }

inline InputMode parse_input_mode(const std::string& s) {
  if (s == "events") return InputMode::events;
  if (s == "sessions") return InputMode::sessions;
  throw std::invalid_argument("mode must be events or sessions");
}
inline ResizeMode parse_resize_mode(const std::string& s) {
  if (s == "stretch") return ResizeMode::stretch_shorter;
  if (s == "downsample") return ResizeMode::downsample_session;
  throw std::invalid_argument("resize-mode must be stretch or downsample");
}
inline Coverage parse_coverage(const std::string& s) {
  if (s == "half_open") return Coverage::half_open;
  if (s == "closed") return Coverage::closed;
  throw std::invalid_argument("coverage must be half_open or closed");
}

/// Comma-separated integers, e.g. "1,10,60".
inline std::vector<Seconds> parse_grid(std::string_view s) {
  std::vector<Seconds> out;
  std::vector<std::string> parts;
  text::split_csv(s, parts);
  for (const auto& p : parts) {
    std::int64_t v = 0;
    if (!text::parse_int64(text::trim(p), v)) throw std::invalid_argument("bad grid value '" + p + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("grid needs at least one value");
  return out;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["inputs"] = c.inputs;
  j["mode"] = to_string(c.mode);
  j["format"] = c.format;
  j["tw"] = c.tw;
  j["grid"] = c.grid;
  j["trim"] = c.trim;
  j["boot"] = c.boot;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha;
  j["evening"] = c.evening;
  j["threshold"] = c.threshold;
  j["out"] = c.out;
  j["offsets"] = c.offsets;
  j["min_active_days"] = c.min_active_days;
  j["start_date"] = c.start_date;
  j["end_date"] = c.end_date;
  j["resize_mode"] = to_string(c.resize_mode);
  j["coverage"] = to_string(c.coverage);
  j["contrast_groups"] = c.contrast_groups;
  j["top_groups"] = c.top_groups;
  j["named_apps"] = c.named_apps;
  j["spec"] = c.spec;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  j["nmd_smartphone"] = opt(c.nmd_smartphone);
  j["md_smartphone"] = opt(c.md_smartphone);
  j["md_tablet"] = opt(c.md_tablet);
  return j;
}

/// Overlays the keys present in a config-file object onto `c`.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config file must contain a JSON object");
  static const std::set<std::string> known = {
      "inputs", "mode", "format", "tw", "grid", "trim", "boot", "seed", "alpha", "evening", "threshold", "out",
      "offsets", "min_active_days", "start_date", "end_date", "resize_mode", "coverage", "contrast_groups",
      "top_groups", "named_apps", "spec", "nmd_smartphone", "md_smartphone", "md_tablet"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  try {
    if (j.contains("inputs")) c.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (j.contains("mode")) c.mode = parse_input_mode(j.at("mode").get<std::string>());
    if (j.contains("format")) c.format = j.at("format").get<std::string>();
    if (j.contains("tw")) c.tw = j.at("tw").get<Seconds>();
    if (j.contains("grid")) c.grid = j.at("grid").get<std::vector<Seconds>>();
    if (j.contains("trim")) c.trim = j.at("trim").get<double>();
    if (j.contains("boot")) c.boot = j.at("boot").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("evening")) c.evening = j.at("evening").get<std::string>();
    if (j.contains("threshold")) c.threshold = j.at("threshold").get<double>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("offsets")) c.offsets = j.at("offsets").get<std::string>();
    if (j.contains("min_active_days")) c.min_active_days = j.at("min_active_days").get<int>();
    if (j.contains("start_date")) c.start_date = j.at("start_date").get<std::string>();
    if (j.contains("end_date")) c.end_date = j.at("end_date").get<std::string>();
    if (j.contains("resize_mode")) c.resize_mode = parse_resize_mode(j.at("resize_mode").get<std::string>());
    if (j.contains("coverage")) c.coverage = parse_coverage(j.at("coverage").get<std::string>());
    if (j.contains("contrast_groups")) c.contrast_groups = j.at("contrast_groups").get<std::vector<unsigned>>();
    if (j.contains("top_groups")) c.top_groups = j.at("top_groups").get<std::size_t>();
    if (j.contains("named_apps")) c.named_apps = j.at("named_apps").get<std::vector<std::string>>();
    if (j.contains("spec")) c.spec = j.at("spec").get<std::string>();
    for (auto [key, field] : {std::pair{"nmd_smartphone", &c.nmd_smartphone}, std::pair{"md_smartphone", &c.md_smartphone},
                              std::pair{"md_tablet", &c.md_tablet}})
      if (j.contains(key) && !j.at(key).is_null()) *field = j.at(key).get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("bad config value: ") + ex.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Report files staged in memory and written together with the manifest.
class ReportSet {
 public:
  ReportSet(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  std::ostringstream& file(const std::string& name) { return files_[name]; }
  void note_input(const std::string& path, const std::string& content) { inputs_.emplace_back(path, fnv1a64(content)); }
  void warn(std::string w) { warnings_.push_back(std::move(w)); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  void commit() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out);
    nlohmann::ordered_json m;
    m["command"] = command_;
    const auto cfg = to_json(cfg_);
    m["config"] = cfg;
    m["config_hash"] = hex64(fnv1a64(cfg.dump()));
    auto ins = nlohmann::ordered_json::array();
    for (const auto& [p, h] : inputs_) ins.push_back({{"path", p}, {"fnv1a64", hex64(h)}});
    m["inputs"] = std::move(ins);
    auto outs = nlohmann::ordered_json::array();
    for (const auto& [name, content] : files_) outs.push_back({{"file", name}, {"fnv1a64", hex64(fnv1a64(content.str()))}});
    m["outputs"] = std::move(outs);
    m["warnings"] = warnings_;
    files_["manifest.json"].str(m.dump(2) + "\n");
    for (const auto& [name, content] : files_) {
      std::ofstream o(fs::path(cfg_.out) / name, std::ios::binary);
      if (!o) throw DataError("cannot write '" + (fs::path(cfg_.out) / name).string() + "'");
      o << content.str();
    }
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::map<std::string, std::ostringstream> files_;
  std::vector<std::pair<std::string, std::uint64_t>> inputs_;
  std::vector<std::string> warnings_;
};

struct LoadedPanel {
  std::vector<AppSession> sessions;  // normalized, activity-filtered
  Diagnostics diagnostics;
  std::size_t events = 0;
  std::size_t raw_sessions = 0;
  ActivityFilterResult activity;
};

inline EventFormat detect_format(const RunConfig& cfg, const std::string& path) {
  if (cfg.format == "csv") return EventFormat::csv;
  if (cfg.format == "jsonl") return EventFormat::jsonl;
  return std::filesystem::path(path).extension() == ".csv" ? EventFormat::csv : EventFormat::jsonl;
}

inline LoadedPanel load_panel(const RunConfig& cfg, ReportSet& reports) {
  if (cfg.inputs.empty()) throw std::invalid_argument("at least one --input is required");
  const PanelWindow window = cfg.window();
  LoadedPanel p;
  std::vector<AppSession> raw;
  if (cfg.mode == InputMode::events) {
    std::vector<AppEvent> events;
    for (const auto& path : cfg.inputs) {
      const std::string content = read_file(path);
      reports.note_input(path, content);
      std::istringstream in(content);
      auto evs = parse_events(in, detect_format(cfg, path), p.diagnostics, window);
      std::move(evs.begin(), evs.end(), std::back_inserter(events));
    }
    p.events = events.size();
    raw = pair_sessions(events, p.diagnostics);
  } else {
    for (const auto& path : cfg.inputs) {
      const std::string content = read_file(path);
      reports.note_input(path, content);
      std::istringstream in(content);
      auto ss = parse_sessions(in, p.diagnostics);
      for (auto& s : ss)
        if (window.contains(s.interval.start())) raw.push_back(std::move(s));
    }
  }
  p.raw_sessions = raw.size();
  auto normalized = normalize(std::move(raw), p.diagnostics);
  p.activity = filter_active(normalized, cfg.min_active_days);
  for (const auto& u : p.activity.dropped)
    p.diagnostics.add("activity", 0, "active span below " + std::to_string(cfg.min_active_days) + " days; user dropped", u);
  p.sessions = p.activity.dropped.empty() ? std::move(normalized) : retain_users(normalized, p.activity.retained);
  return p;
}

inline std::map<std::string, Seconds> load_offsets(const RunConfig& cfg, ReportSet& reports) {
  std::map<std::string, Seconds> out;
  if (cfg.offsets.empty()) {
    reports.warn("no UTC offsets given; local-time reports use UTC");
    return out;
  }
  const std::string content = read_file(cfg.offsets);
  reports.note_input(cfg.offsets, content);
  std::istringstream in(content);
  std::string line;
  std::vector<std::string> f;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (lineno == 1) {
      if (text::trim(line) != "user_id,utc_offset_seconds")
        throw FormatError("expected header 'user_id,utc_offset_seconds'", lineno);
      continue;
    }
    std::int64_t off = 0;
    if (!text::split_csv(line, f) || f.size() != 2 || !text::parse_int64(f[1], off))
      throw FormatError("bad offset row", lineno);
    out[f[0]] = off;
  }
  return out;
}

// --- report writers -------------------------------------------------------------------------

inline std::string cell(const std::optional<double>& v, int digits) { return v ? text::fixed(*v, digits) : "NA"; }

inline void write_construction_table(std::ostream& os, const ConstructionStats& st) {
  os << "measure,smartphone,tablet,multidevice\n";
  const std::array<const ConstructionStats::Column*, 3> cols = {&st.smartphone, &st.tablet, &st.multidevice};
  os << "app_sessions";
  for (auto* c : cols) os << ',' << c->app_sessions;
  os << "\nusage_sessions";
  for (auto* c : cols) os << ',' << c->usage_sessions;
  os << "\nmd_sessions,-,-," << st.multidevice.md_sessions << '\n';
  for (std::size_t r = 0; r < kRelationLabelCount; ++r) {
    const auto label = static_cast<RelationLabel>(r);
    os << to_string(label);
    for (auto* c : cols) {
      os << ',';
      const bool single = c != &st.multidevice;
      const bool applicable = !single || label == RelationLabel::meets || label == RelationLabel::metBy ||
                              label == RelationLabel::precedesWithinTW || label == RelationLabel::precededByWithinTW;
      os << (applicable ? text::fixed(c->shares.percent(label), 2) : std::string("-"));
    }
    os << '\n';
  }
}

inline void write_dataset_table(std::ostream& os, const ConstructedPanel& panel, const std::set<std::string>& users,
                                std::span<const SessionClass> classes) {
  os << "measure";
  for (auto c : classes) os << ',' << to_string(c);
  os << '\n';
  std::vector<std::optional<StatsSummary>> sums;
  for (auto c : classes) {
    const auto recs = records_of(panel, c, &users);
    sums.push_back(summarize(recs));
  }
  const UsageShares shares = usage_shares(panel, &users);
  auto row = [&](const char* name, auto get, int digits) {
    os << name;
    for (const auto& s : sums) os << ',' << (s ? text::fixed(get(*s), digits) : std::string("NA"));
    os << '\n';
  };
  row("sessions", [](const StatsSummary& s) { return static_cast<double>(s.sessions); }, 0);
  row("length_mean_s", [](const StatsSummary& s) { return s.length_seconds.mean; }, 2);
  row("length_median_s", [](const StatsSummary& s) { return s.length_seconds.median; }, 2);
  row("length_sd_s", [](const StatsSummary& s) { return s.length_seconds.sd; }, 2);
  row("app_sessions_mean", [](const StatsSummary& s) { return s.app_sessions.mean; }, 2);
  row("app_sessions_median", [](const StatsSummary& s) { return s.app_sessions.median; }, 2);
  row("app_sessions_sd", [](const StatsSummary& s) { return s.app_sessions.sd; }, 2);
  row("interaction_s", [](const StatsSummary& s) { return static_cast<double>(s.interaction_seconds); }, 0);
  for (ShareBasis b : kShareBases) {
    os << "share_pct_" << to_string(b);
    for (auto c : classes) os << ',' << text::fixed(shares.get(b, c), 2);
    os << '\n';
  }
}

inline void write_per_user_table(std::ostream& os, const ConstructedPanel& panel, const UserIndex& index,
                                 const std::set<std::string>& users, std::span<const SessionClass> classes) {
  os << "measure";
  for (auto c : classes) os << ',' << to_string(c);
  os << '\n';
  std::vector<PerUserSummary> sums;
  for (auto c : classes) sums.push_back(per_user_summary(panel, c, index, &users));
  using Getter = const std::optional<Moments>& (*)(const PerUserSummary&);
  const std::array<std::pair<const char*, Getter>, 4> metrics = {
      std::pair<const char*, Getter>{"length_s", [](const PerUserSummary& s) -> const std::optional<Moments>& { return s.median_length_seconds; }},
      {"app_sessions", [](const PerUserSummary& s) -> const std::optional<Moments>& { return s.median_app_sessions; }},
      {"sessions_per_day", [](const PerUserSummary& s) -> const std::optional<Moments>& { return s.sessions_per_day; }},
      {"interaction_min_per_day", [](const PerUserSummary& s) -> const std::optional<Moments>& { return s.interaction_minutes_per_day; }}};
  for (const auto& [name, get] : metrics) {
    for (const char* stat : {"mean", "median", "sd"}) {
      os << name << '_' << stat;
      for (const auto& s : sums) {
        const auto& m = get(s);
        os << ',';
        if (!m) {
          os << "NA";
          continue;
        }
        const double v = std::string_view(stat) == "mean" ? m->mean : std::string_view(stat) == "median" ? m->median : m->sd;
        os << text::fixed(v, 2);
      }
      os << '\n';
    }
  }
  os << "users";
  for (const auto& s : sums) os << ',' << (s.sessions_per_day ? s.sessions_per_day->n : 0);
  os << '\n';
}

inline void write_sweep(std::ostream& os, std::span<const SweepPoint> points) {
  os << "tw";
  for (auto c : kSessionClasses) os << ",sessions_per_user_" << to_string(c);
  for (auto c : kSessionClasses) os << ",app_sessions_per_session_" << to_string(c);
  os << ",usage_sessions,md_sessions\n";
  for (const auto& p : points) {
    os << p.tw;
    for (double v : p.sessions_per_user) os << ',' << text::fixed(v, 4);
    for (double v : p.app_sessions_per_session) os << ',' << text::fixed(v, 4);
    os << ',' << p.usage_sessions << ',' << p.md_sessions << '\n';
  }
}

inline void write_battery_csv(std::ostream& os, const BatteryTable& t) {
  os << "item,p_value,direction,effect_size,label,excluded_reason\n";
  for (const auto& row : t.rows) {
    os << text::csv_field(row.item) << ',';
    if (!row.result) {
      os << "-,-,-,-," << text::csv_field(row.excluded_reason) << '\n';
      continue;
    }
    const auto& r = *row.result;
    os << text::fixed(r.p_value, 4) << ',' << direction_string(r, t.comparison) << ','
       << (r.effect_size ? text::fixed(*r.effect_size, 4) : std::string()) << ',' << to_string(r.label) << ",\n";
  }
}

// --- commands ------------------------------------------------------------------------------

inline int cmd_ingest(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("ingest", cfg);
  auto p = load_panel(cfg, reports);
  write_sessions(reports.file("sessions.csv"), p.sessions);
  p.diagnostics.write_jsonl(reports.file("diagnostics.jsonl"));
  nlohmann::ordered_json s;
  s["events"] = p.events;
  s["app_sessions_paired"] = p.raw_sessions;
  s["app_sessions"] = p.sessions.size();
  s["users_retained"] = p.activity.retained.size();
  s["users_dropped"] = p.activity.dropped.size();
  s["diagnostics"] = p.diagnostics.size();
  for (const char* stage : {"parse", "pair", "normalize", "activity"}) s["diagnostics_" + std::string(stage)] = p.diagnostics.count(stage);
  reports.file("ingest.json") << s.dump(2) << '\n';
  reports.commit();
  return 0;
}

inline int cmd_sessions(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("sessions", cfg);
  auto p = load_panel(cfg, reports);
  const auto panel = construct_panel(p.sessions, cfg.tw);
  write_usage_sessions_jsonl(reports.file("usage_sessions.jsonl"), panel);
  write_md_sessions_jsonl(reports.file("md_sessions.jsonl"), panel);
  const auto idx = index_users(panel);
  const auto md_users = population(idx, true);
  const auto nmd_users = population(idx, false);
  write_construction_table(reports.file("table2.csv"), construction_stats(construct_panel(retain_users(p.sessions, md_users), cfg.tw)));
  write_construction_table(reports.file("tableA1.csv"), construction_stats(construct_panel(retain_users(p.sessions, nmd_users), cfg.tw)));
  write_construction_table(reports.file("construction_all.csv"), construction_stats(panel));
  reports.commit();
  return 0;
}

inline int cmd_patterns(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("patterns", cfg);
  auto p = load_panel(cfg, reports);
  const auto panel = construct_panel(p.sessions, cfg.tw);
  const auto assignments = assign_groups(panel, cfg.resize_mode, cfg.coverage);
  auto& groups = reports.file("groups.csv");
  auto& table4 = reports.file("table4.csv");
  auto& contrasts = reports.file("contrasts.csv");
  groups << "group_id,matrix_bits,share_overall,share_per_user_mean\n";
  table4 << "rank,overall_group,overall_bits,overall_share,per_user_group,per_user_bits,per_user_share\n";
  contrasts << "group,device,category,share_group,share_complement,relative_difference,fold_difference\n";
  nlohmann::ordered_json summary;
  auto& assign_file = reports.file("assignments.csv");
  assign_file << "md_session,user_id,group_id\n";
  for (const auto& a : assignments) assign_file << a.md_session << ',' << text::csv_field(a.user_id) << ',' << a.group << '\n';
  if (assignments.empty()) {
    summary["empty"] = true;
    summary["md_sessions"] = 0;
    reports.file("patterns.json") << summary.dump(2) << '\n';
    reports.commit();
    return 0;
  }
  const auto rep = group_frequencies(assignments);
  const auto overall = rep.ranking(false);
  const auto per_user = rep.ranking(true);
  for (unsigned g : overall)
    if (rep.overall[g] > 0 || rep.per_user_mean[g] > 0)
      groups << g << ',' << prototype_bits(g) << ',' << text::fixed(rep.overall[g], 4) << ','
             << text::fixed(rep.per_user_mean[g], 4) << '\n';
  for (std::size_t k = 0; k < cfg.top_groups && k < kPrototypeCount; ++k) {
    const unsigned a = overall[k], b = per_user[k];
    if (rep.overall[a] <= 0 && rep.per_user_mean[b] <= 0) break;
    table4 << k + 1 << ',' << a << ',' << prototype_bits(a) << ',' << text::fixed(rep.overall[a], 2) << ',' << b << ','
           << prototype_bits(b) << ',' << text::fixed(rep.per_user_mean[b], 2) << '\n';
  }
  std::vector<unsigned> targets = cfg.contrast_groups;
  if (targets.empty()) targets = {overall[0], overall[1]};
  auto skipped = nlohmann::ordered_json::array();
  for (unsigned g : targets) {
    try {
      for (const auto& c : category_contrast(panel, assignments, g))
        contrasts << g << ',' << to_string(c.device) << ',' << text::csv_field(c.category) << ','
                  << text::fixed(c.share_group, 4) << ',' << text::fixed(c.share_complement, 4) << ','
                  << text::fixed(c.relative_difference, 4) << ','
                  << (c.fold_difference ? text::fixed(*c.fold_difference, 4) : std::string("NA")) << '\n';
    } catch (const DataError& e) {
      skipped.push_back({{"group", g}, {"reason", e.what()}});
    }
  }
  summary["empty"] = false;
  summary["md_sessions"] = rep.sessions;
  summary["users"] = rep.users;
  summary["top_group_overall"] = overall[0];
  summary["top_group_per_user"] = per_user[0];
  summary["resize_mode"] = to_string(cfg.resize_mode);
  summary["coverage"] = to_string(cfg.coverage);
  summary["contrast_skipped"] = std::move(skipped);
  reports.file("patterns.json") << summary.dump(2) << '\n';
  reports.commit();
  return 0;
}

inline int cmd_stats(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("stats", cfg);
  auto p = load_panel(cfg, reports);
  const auto offsets = load_offsets(cfg, reports);
  const auto panel = construct_panel(p.sessions, cfg.tw);
  const auto idx = index_users(panel, offsets);
  const auto md_users = population(idx, true);
  const auto nmd_users = population(idx, false);

  write_dataset_table(reports.file("table3.csv"), panel, md_users, kSessionClasses);
  write_per_user_table(reports.file("table5.csv"), panel, idx, md_users, kSessionClasses);
  const std::array<SessionClass, 1> sp_only = {SessionClass::smartphone_all};
  write_dataset_table(reports.file("tableA2.csv"), panel, nmd_users, sp_only);
  write_per_user_table(reports.file("tableA3.csv"), panel, idx, nmd_users, sp_only);

  {
    const auto md_rep = category_share_report(p.sessions, cfg.named_apps, 5, &md_users);
    std::vector<std::string> apps = cfg.named_apps;
    if (apps.empty())
      for (const auto& r : md_rep.apps[0])
        if (r.name != "Other") apps.push_back(r.name);
    const auto md_fixed = category_share_report(p.sessions, apps, 0, &md_users);
    const auto nmd_fixed = category_share_report(p.sessions, apps, 0, &nmd_users);
    auto& os = reports.file("tableA4.csv");
    os << "section,name,md_smartphone,md_tablet,nmd_smartphone\n";
    auto lookup = [](const std::vector<ShareRow>& rows, const std::string& name) {
      for (const auto& r : rows)
        if (r.name == name) return text::fixed(r.percent, 2);
      return std::string("0.00");
    };
    for (const char* section : {"category", "app"}) {
      const bool cat = std::string_view(section) == "category";
      std::set<std::string> names;
      for (const auto* rows : {cat ? &md_fixed.categories[0] : &md_fixed.apps[0], cat ? &md_fixed.categories[1] : &md_fixed.apps[1],
                               cat ? &nmd_fixed.categories[0] : &nmd_fixed.apps[0]})
        for (const auto& r : *rows) names.insert(r.name);
      // Order rows by the multidevice smartphone column as in the source layout.
      const auto& primary = cat ? md_fixed.categories[0] : md_fixed.apps[0];
      std::vector<std::string> ordered;
      for (const auto& r : primary) ordered.push_back(r.name);
      for (const auto& n : names)
        if (std::find(ordered.begin(), ordered.end(), n) == ordered.end()) ordered.push_back(n);
      for (const auto& n : ordered)
        os << section << ',' << text::csv_field(n) << ',' << lookup(cat ? md_fixed.categories[0] : md_fixed.apps[0], n) << ','
           << lookup(cat ? md_fixed.categories[1] : md_fixed.apps[1], n) << ','
           << lookup(cat ? nmd_fixed.categories[0] : nmd_fixed.apps[0], n) << '\n';
    }
  }

  {
    auto& os = reports.file("cdf.csv");
    os << "metric,class,value,cumulative,display_value\n";
    for (SessionClass c : kSessionClasses) {
      const auto recs = records_of(panel, c, &md_users);
      if (recs.empty()) continue;
      std::vector<double> len, apps;
      for (const auto& r : recs) {
        len.push_back(static_cast<double>(r.hull.duration()));
        apps.push_back(static_cast<double>(r.app_sessions));
      }
      for (const auto& pt : empirical_cdf(len))
        os << "session_length_s," << to_string(c) << ',' << text::fixed(pt.value, 0) << ',' << text::fixed(pt.cumulative, 6)
           << ',' << text::fixed(pt.value, 0) << '\n';
      for (const auto& pt : empirical_cdf(apps))
        os << "app_sessions," << to_string(c) << ',' << text::fixed(pt.value, 0) << ',' << text::fixed(pt.cumulative, 6)
           << ',' << text::fixed(pt.value, 0) << '\n';
      const auto gaps = inter_session_times(panel, c, &md_users);
      if (!gaps.empty())
        for (const auto& pt : empirical_cdf(gaps))
          os << "inter_session_s_shift60," << to_string(c) << ',' << text::fixed(pt.value, 0) << ','
             << text::fixed(pt.cumulative, 6) << ',' << text::fixed(pt.value + 60.0, 0) << '\n';
    }
  }

  {
    auto& os = reports.file("hourly.csv");
    os << "hour";
    for (auto c : kSessionClasses) os << ',' << to_string(c);
    os << '\n';
    std::vector<HourlyDistribution> h;
    for (auto c : kSessionClasses) h.push_back(hourly_distribution(records_of(panel, c, &md_users), idx));
    for (int hour = 0; hour < 24; ++hour) {
      os << hour;
      for (const auto& d : h) os << ',' << text::fixed(d.percent[static_cast<std::size_t>(hour)], 4);
      os << '\n';
    }
  }

  write_sweep(reports.file("sweep.csv"), timeout_sweep(p.sessions, cfg.grid));

  nlohmann::ordered_json meta;
  meta["tw"] = cfg.tw;
  meta["users"] = idx.size();
  meta["md_users"] = md_users.size();
  meta["nmd_users"] = nmd_users.size();
  meta["hourly_method"] = "interaction time apportioned by overlap with each local hour";
  meta["local_time"] = offsets.empty() ? "utc" : "per-user offsets";
  meta["median_convention"] = "tables average the two middle values; ECDF read-off takes the smallest value with F >= 0.5";
  meta["per_day_denominator"] = "active span in days, first to last usage day inclusive";
  reports.file("stats.json") << meta.dump(2) << '\n';
  reports.commit();
  return 0;
}

inline int cmd_compare(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("compare", cfg);
  auto p = load_panel(cfg, reports);
  const auto offsets = load_offsets(cfg, reports);
  const auto panel = construct_panel(p.sessions, cfg.tw);
  const auto idx = index_users(panel, offsets);
  BatteryConfig bc;
  bc.trim = cfg.trim_spec();
  bc.threshold = cfg.threshold;
  bc.evening = parse_day_window(cfg.evening);

  const std::array<std::pair<Dimension, Comparison>, 7> runs = {{
      {Dimension::category, Comparison::pure_vs_mixed_paired},
      {Dimension::app, Comparison::pure_vs_mixed_paired},
      {Dimension::total, Comparison::md_vs_nmd_all},
      {Dimension::total, Comparison::md_vs_nmd_smartphone},
      {Dimension::category, Comparison::md_vs_nmd_all},
      {Dimension::category, Comparison::md_vs_nmd_smartphone},
      {Dimension::app, Comparison::md_vs_nmd_all},
  }};
  auto& txt = reports.file("compare.txt");
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  std::vector<BatteryTable> tables;
  for (const auto& [dim, cmp] : runs) tables.push_back(test_battery(panel, idx, dim, cmp, bc));
  tables.push_back(test_battery(panel, idx, Dimension::app, Comparison::md_vs_nmd_smartphone, bc));
  for (const auto& t : tables) {
    const std::string name = "battery_" + std::string(to_string(t.dimension)) + "_" + std::string(to_string(t.comparison));
    write_battery_csv(reports.file(name + ".csv"), t);
    txt << "# " << to_string(t.dimension) << " / " << to_string(t.comparison) << '\n';
    for (const auto& row : t.rows) txt << row.item << '\t' << battery_cell(row, t.comparison) << '\n';
    txt << '\n';
    nlohmann::ordered_json j;
    j["table"] = name;
    j["rows"] = t.rows.size();
    std::size_t tested = 0;
    for (const auto& r : t.rows) tested += r.result.has_value();
    j["tested"] = tested;
    j["excluded_users"] = t.excluded_users;
    summary.push_back(std::move(j));
  }
  txt << "significance: * p<0.05, ** p<0.01, *** p<0.001; '-' marks items below the inclusion threshold\n";
  reports.file("compare.json") << summary.dump(2) << '\n';
  reports.commit();
  return 0;
}

inline int cmd_substitution(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("substitution", cfg);
  double nmd_sp = 0, md_sp = 0, md_tab = 0;
  std::string source;
  if (cfg.nmd_smartphone && cfg.md_smartphone && cfg.md_tablet) {
    nmd_sp = *cfg.nmd_smartphone;
    md_sp = *cfg.md_smartphone;
    md_tab = *cfg.md_tablet;
    source = "explicit";
  } else if (cfg.nmd_smartphone || cfg.md_smartphone || cfg.md_tablet) {
    throw std::invalid_argument("give all three of --nmd-smartphone, --md-smartphone, --md-tablet or none");
  } else {
    auto p = load_panel(cfg, reports);
    const auto panel = construct_panel(p.sessions, cfg.tw);
    const auto m = daily_usage_means(panel, index_users(panel), cfg.trim);
    nmd_sp = m.nmd_smartphone;
    md_sp = m.md_smartphone;
    md_tab = m.md_tablet;
    source = "panel";
  }
  const auto s = substitution_split(nmd_sp, md_sp, md_tab);
  nlohmann::ordered_json j;
  j["source"] = source;
  j["tm_nmd_smartphone"] = text::fixed(nmd_sp, 4);
  j["tm_md_smartphone"] = text::fixed(md_sp, 4);
  j["tm_md_tablet"] = text::fixed(md_tab, 4);
  j["substitution_minutes"] = text::fixed(s.substitution_minutes, 4);
  j["novel_minutes"] = text::fixed(s.novel_minutes, 4);
  j["substitution_share"] = text::fixed(s.substitution_share, 4);
  j["novel_share"] = text::fixed(s.novel_share, 4);
  j["interpretable"] = s.interpretable;
  j["note"] = s.note;
  reports.file("substitution.json") << j.dump(2) << '\n';
  auto& csv = reports.file("substitution.csv");
  csv << "measure,value\n"
      << "substitution_minutes," << text::fixed(s.substitution_minutes, 2) << '\n'
      << "novel_minutes," << text::fixed(s.novel_minutes, 2) << '\n'
      << "substitution_pct," << text::fixed(100.0 * s.substitution_share, 1) << '\n'
      << "novel_pct," << text::fixed(100.0 * s.novel_share, 1) << '\n';
  reports.commit();
  return 0;
}

inline int cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  ReportSet reports("sweep", cfg);
  auto p = load_panel(cfg, reports);
  write_sweep(reports.file("sweep.csv"), timeout_sweep(p.sessions, cfg.grid));
  reports.commit();
  return 0;
}

/// `seed_override` replaces the spec's seed when the flag was given on the command line.
inline int cmd_generate(const RunConfig& cfg, std::optional<std::uint64_t> seed_override) {
  cfg.validate();
  if (cfg.spec.empty()) throw std::invalid_argument("generate needs --spec");
  ReportSet reports("generate", cfg);
  const std::string content = read_file(cfg.spec);
  reports.note_input(cfg.spec, content);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("invalid spec JSON: ") + e.what());
  }
  PanelSpec spec = panel_spec_from_json(j);
  if (seed_override) spec.seed = *seed_override;
  const auto g = generate(spec);
  write_events_jsonl(reports.file("events.jsonl"), g.events);
  nlohmann::ordered_json t;
  t["seed"] = spec.seed;
  t["events"] = g.events.size();
  t["app_sessions"] = g.truth.app_sessions;
  t["md_episodes"] = g.truth.md_episodes;
  nlohmann::ordered_json planted = nlohmann::ordered_json::object();
  for (const auto& [id, n] : g.truth.planted_prototypes) planted[std::to_string(id)] = n;
  t["planted_prototypes"] = std::move(planted);
  nlohmann::ordered_json users = nlohmann::ordered_json::object();
  for (const auto& [u, info] : g.truth.users)
    users[u] = {{"multidevice", info.multidevice},
                {"smartphone_seconds", info.interaction_seconds[0]},
                {"tablet_seconds", info.interaction_seconds[1]},
                {"active_days", info.last_day - info.first_day + 1}};
  t["users"] = std::move(users);
  reports.file("truth.json") << t.dump(2) << '\n';
  reports.commit();
  return 0;
}

}  // namespace mdsession
