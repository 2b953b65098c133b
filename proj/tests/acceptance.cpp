// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "mdsession/mdsession.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mdsession;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::vector<AppSession> ingest(const std::vector<AppEvent>& events) {
  Diagnostics d;
  return normalize(pair_sessions(events, d), d);
}

Outcome allen_oracle() {
  Outcome o;
  Rng rng(20240601);
  const auto t0 = Clock::now();
  for (int i = 0; i < 10000; ++i) {
    const auto as = rng.between(0, 30), bs = rng.between(0, 30);
    const auto ae = as + rng.between(1, 15), be = bs + rng.between(1, 15);
    const auto m = oracle::allen_matches(as, ae, bs, be);
    if (m.size() != 1) return o.fail("oracle matched " + std::to_string(m.size()) + " relations"), o;
    if (classify(Interval(as, ae), Interval(bs, be)) != m[0]) {
      o.fail("mismatch at [" + std::to_string(as) + "," + std::to_string(ae) + ") vs [" + std::to_string(bs) + "," +
             std::to_string(be) + ")");
      return o;
    }
  }
  const double t = seconds_since(t0);
  if (t >= 1.0) o.fail("runtime " + std::to_string(t) + " s");
  o.detail = o.pass ? "10000 pairs, " + text::fixed(t * 1000, 1) + " ms" : o.detail;
  return o;
}

Outcome two_device_example() {
  Outcome o;
  Diagnostics d;
  const auto panel = construct_panel(normalize(fixture::two_device_example(), d), 60);
  auto names = [](const UsageSession& u) {
    std::string s;
    for (const auto& a : u.app_sessions) s += a.app_id;
    return s;
  };
  std::vector<std::string> got;
  for (const auto& u : panel.usage_sessions) got.push_back(names(u));
  if (got != std::vector<std::string>{"ABC", "D", "EF", "G"}) return o.fail("usage sessions differ"), o;
  std::vector<std::set<std::string>> md;
  for (const auto& m : panel.md_sessions) {
    std::set<std::string> s;
    for (const auto* u : panel.members(m)) s.insert(names(*u));
    md.push_back(s);
  }
  // H = ABC, I = D, J = EF, K = G.
  const std::vector<std::set<std::string>> want = {{"ABC", "EF"}, {"D", "G"}};
  if (md != want) o.fail("multidevice sessions differ");
  o.detail = "H-K built, L={H,J}, M={I,K}";
  return o;
}

Outcome prototypes() {
  Outcome o;
  for (unsigned id = 0; id < kPrototypeCount; ++id) {
    const auto m = prototype_matrix(id);
    if (prototype_id(m) != id) return o.fail("round trip failed for " + std::to_string(id)), o;
    for (auto mode : {ResizeMode::stretch_shorter, ResizeMode::downsample_session})
      if (assign_group(m, mode) != id) return o.fail("prototype " + std::to_string(id) + " not assigned to itself"), o;
  }
  const std::map<unsigned, ActivityMatrix> quoted = {{15, ActivityMatrix({0, 0, 0, 0}, {1, 1, 1, 1})},
                                                     {240, ActivityMatrix({1, 1, 1, 1}, {0, 0, 0, 0})},
                                                     {135, ActivityMatrix({1, 0, 0, 0}, {0, 1, 1, 1})}};
  for (const auto& [id, m] : quoted)
    if (prototype_id(m) != id) o.fail("quoted matrix for " + std::to_string(id) + " maps to " + std::to_string(prototype_id(m)));
  o.detail = "256 round trips, 15/240/135 quoted matrices";
  return o;
}

Outcome worked_matrix() {
  Outcome o;
  const auto sp = fixture::app("u", DeviceType::smartphone, 1, 4);
  const auto tab = fixture::app("u", DeviceType::tablet, 3, 5);
  const std::vector<const AppSession*> apps = {&sp, &tab};
  const auto m = to_matrix(apps, Interval(1, 5), Coverage::closed);
  if (!(m == ActivityMatrix({1, 1, 1, 1, 0}, {0, 0, 1, 1, 1}))) o.fail("matrix differs");
  o.detail = "closed endpoints, 2x5";
  return o;
}

Outcome timeout_monotonicity() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::vector<Seconds> grid = {1, 10, 60, 300, 1000, 10000};
  std::size_t violations = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PanelSpec spec;
    spec.seed = seed;
    spec.days = 7;
    spec.md_users = 5;
    spec.nmd_users = 5;
    spec.max_intra_gap = 120;
    spec.min_separation = 180;
    const auto sw = timeout_sweep(ingest(generate(spec).events), grid);
    for (std::size_t i = 1; i < sw.size(); ++i) {
      violations += sw[i].usage_sessions > sw[i - 1].usage_sessions;
      for (auto c : {SessionClass::smartphone_all, SessionClass::tablet_all}) {
        const auto k = static_cast<std::size_t>(c);
        violations += sw[i].app_sessions_per_session[k] < sw[i - 1].app_sessions_per_session[k] - 1e-12;
      }
    }
  }
  const double t = seconds_since(t0);
  if (violations) o.fail(std::to_string(violations) + " violations");
  if (t >= 30) o.fail("runtime " + std::to_string(t) + " s");
  if (o.pass) o.detail = "20 panels, 0 violations, " + text::fixed(t, 2) + " s";
  return o;
}

Outcome share_partitions() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PanelSpec spec;
    spec.seed = seed;
    spec.days = 10;
    spec.md_users = 10;
    spec.nmd_users = 5;
    const auto p = construct_panel(ingest(generate(spec).events), 60);
    const auto s = usage_shares(p);
    for (auto b : kShareBases) {
      const double two = s.get(b, SessionClass::smartphone_all) + s.get(b, SessionClass::tablet_all);
      const double three = s.get(b, SessionClass::smartphone_pure) + s.get(b, SessionClass::tablet_pure) +
                           s.get(b, SessionClass::multidevice);
      worst = std::max({worst, std::abs(two - 100), std::abs(three - 100)});
    }
    const auto st = construction_stats(p);
    for (const auto* c : {&st.smartphone, &st.tablet, &st.multidevice}) {
      if (c->shares.total() == 0) continue;
      double sum = 0;
      for (std::size_t r = 0; r < kRelationLabelCount; ++r) sum += c->shares.percent(static_cast<RelationLabel>(r));
      worst = std::max(worst, std::abs(sum - 100));
    }
  }
  if (worst > 0.2) o.fail("max deviation " + std::to_string(worst));
  o.detail = "max deviation " + text::fixed(worst, 6) + " pp";
  return o;
}

Outcome trimmed_mean_case() {
  Outcome o;
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  if (trimmed_mean(v, 0.2) != 5.5) o.fail("[1..10] at 0.2 gives " + std::to_string(trimmed_mean(v, 0.2)));
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> w(1 + rng.below(50));
    for (auto& x : w) x = rng.lognormal(1, 1);
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    if (std::abs(trimmed_mean(w, 0.0) - mean) > 1e-12) o.fail("gamma = 0 differs from the mean");
  }
  o.detail = "5.5 exact; gamma=0 equals mean";
  return o;
}

Outcome calibration() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::uint64_t master = 777;
  std::size_t paired = 0, two = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    Rng rng(derive_seed(master, static_cast<std::uint64_t>(r)));
    std::vector<double> x(60), y(60);
    for (auto& v : x) v = rng.lognormal(0, 1);
    for (auto& v : y) v = rng.lognormal(0, 1);
    TrimSpec spec;
    spec.boot = 2000;
    spec.seed = derive_seed(master, "boot/" + std::to_string(r));
    paired += paired_bootstrap_test(x, y, spec).p_value < 0.05;
    two += two_sample_bootstrap_test(x, y, spec).p_value < 0.05;
  }
  const double rp = static_cast<double>(paired) / reps, rt = static_cast<double>(two) / reps;
  const double t = seconds_since(t0);
  for (double rate : {rp, rt})
    if (rate < 0.03 || rate > 0.07) o.fail("rejection rate " + text::fixed(rate, 3) + " outside [0.03, 0.07]");
  if (t >= 300) o.fail("runtime " + std::to_string(t) + " s");
  const std::string d = "paired " + text::fixed(rp, 3) + ", two-sample " + text::fixed(rt, 3) + ", " + text::fixed(t, 1) + " s";
  o.detail = o.pass ? d : o.detail + "; " + d;
  return o;
}

Outcome substitution() {
  Outcome o;
  const auto s = substitution_split(172.81, 138.00, 71.83);
  const double sub = 100 * s.substitution_share, nov = 100 * s.novel_share;
  if (std::abs(sub - 48.5) > 0.5 || std::abs(nov - 51.5) > 0.5 || !s.interpretable) o.fail("shares off");
  o.detail = "substitution " + text::fixed(sub, 2) + "%, novel " + text::fixed(nov, 2) + "%";
  return o;
}

Outcome planted_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  PanelSpec spec;
  spec.seed = 2024;
  spec.days = 30;
  spec.md_users = 50;
  spec.nmd_users = 50;
  spec.prototype_quotas = {{15, 0.3}};
  spec.effects.push_back({UserGroup::md, std::nullopt, std::nullopt, "Games", 2.0});
  const auto sessions = ingest(generate(spec).events);
  const auto active = filter_active(sessions, 23);
  const auto panel = construct_panel(retain_users(sessions, active.retained), 60);
  const auto idx = index_users(panel);

  const auto report = group_frequencies(assign_groups(panel));
  const unsigned top = report.ranking(false)[0];
  if (top != 15) o.fail("top group is " + std::to_string(top));

  BatteryConfig cfg;
  cfg.trim.seed = spec.seed;
  const auto t = test_battery(panel, idx, Dimension::category, Comparison::md_vs_nmd_smartphone, cfg);
  std::string games = "missing";
  for (const auto& r : t.rows) {
    if (r.item != "Games") continue;
    games = battery_cell(r, t.comparison);
    if (!r.result || r.result->p_value >= 0.05 || r.result->direction != Direction::x_greater)
      o.fail("Games row " + games);
  }
  if (games == "missing") o.fail("no Games row");
  const double secs = seconds_since(t0);
  if (secs >= 120) o.fail("runtime " + std::to_string(secs) + " s");
  const std::string d = std::to_string(idx.size()) + " users, top group " + std::to_string(top) + " (" +
                        text::fixed(report.overall[top], 1) + "%), Games " + games + ", " + text::fixed(secs, 1) + " s";
  o.detail = o.pass ? d : o.detail + "; " + d;
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    files[e.path().filename().string()] = os.str();
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" MDSESSION_CLI "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "mdsession_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "spec.json") << R"({"seed": 11, "days": 30, "md_users": 12, "nmd_users": 12,
    "prototype_quotas": {"15": 0.3}, "effects": [{"population": "md", "category": "Games", "factor": 2}]})";
  const std::map<std::string, std::string> commands = {
      {"generate", "--spec " + (root / "spec.json").string()},
      {"ingest", ""},
      {"sessions", ""},
      {"patterns", ""},
      {"stats", ""},
      {"compare", "--boot 500"},
      {"substitution", "--boot 500"},
      {"sweep", ""}};
  const std::string events = (root / "generate" / "events.jsonl").string();
  std::size_t files = 0;
  for (const char* name : {"generate", "ingest", "sessions", "patterns", "stats", "compare", "substitution", "sweep"}) {
    const fs::path out = root / name;
    std::string args = std::string(name) + " " + commands.at(name) + " --out " + out.string();
    if (std::string(name) != "generate") args += " --input " + events;
    if (run_cli(args) != 0) return o.fail(std::string(name) + " failed"), o;
    const auto first = snapshot(out);
    if (run_cli(args) != 0) return o.fail(std::string(name) + " failed on rerun"), o;
    if (snapshot(out) != first) return o.fail(std::string(name) + " output changed between runs"), o;
    files += first.size();
  }
  o.detail = "8 commands, " + std::to_string(files) + " files identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"allen relation oracle", allen_oracle},
      {"two-device reconstruction example", two_device_example},
      {"prototype encoding", prototypes},
      {"worked activity matrix", worked_matrix},
      {"timeout monotonicity", timeout_monotonicity},
      {"share partitions", share_partitions},
      {"trimmed mean", trimmed_mean_case},
      {"bootstrap calibration", calibration},
      {"substitution arithmetic", substitution},
      {"planted recovery", planted_recovery},
      {"cli determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
