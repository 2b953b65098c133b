#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdsession/descriptive.hpp"
#include "mdsession/patterns.hpp"
#include "mdsession/robust.hpp"

namespace mdsession {

/// Daily local-time window [start, end) in seconds after midnight.
struct DayWindow {
  Seconds start = 17 * 3600;
  Seconds end = 24 * 3600;

  void validate() const {
    if (start < 0 || end > 86400 || start >= end) throw std::invalid_argument("day window must satisfy 0 <= start < end <= 24:00");
  }
  bool whole_day() const { return start == 0 && end == 86400; }
};

/// Parses "HH:MM-HH:MM" (end may be 24:00).
inline DayWindow parse_day_window(std::string_view s) {
  auto clock = [](std::string_view t) -> Seconds {
    t = text::trim(t);
    const auto colon = t.find(':');
    std::int64_t h = 0, m = 0;
    if (colon == std::string_view::npos || !text::parse_int64(t.substr(0, colon), h) ||
        !text::parse_int64(t.substr(colon + 1), m) || h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0))
      throw std::invalid_argument("bad clock time '" + std::string(t) + "', expected HH:MM");
    return h * 3600 + m * 60;
  };
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) throw std::invalid_argument("bad window '" + std::string(s) + "', expected HH:MM-HH:MM");
  DayWindow w{clock(s.substr(0, dash)), clock(s.substr(dash + 1))};
  w.validate();
  return w;
}

/// Seconds of [start, end) that fall inside the daily window, in local time.
inline Seconds window_overlap(Instant start, Instant end, Seconds utc_offset, const DayWindow& w) {
  if (w.whole_day()) return end - start;
  Seconds total = 0;
  const Instant ls = start + utc_offset, le = end + utc_offset;
  for (std::int64_t day = text::floor_div(ls, 86400); day * 86400 < le; ++day) {
    const Instant a = std::max(ls, day * 86400 + w.start);
    const Instant b = std::min(le, day * 86400 + w.end);
    if (b > a) total += b - a;
  }
  return total;
}

enum class Dimension { category, app, total };
enum class Comparison { pure_vs_mixed_paired, md_vs_nmd_all, md_vs_nmd_smartphone };

inline std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::category:
      return "category";
    case Dimension::app:
      return "app";
    default:
      return "total";
  }
}

inline std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::pure_vs_mixed_paired:
      return "pure_vs_mixed_paired";
    case Comparison::md_vs_nmd_all:
      return "md_vs_nmd_all";
    default:
      return "md_vs_nmd_smartphone";
  }
}

/// Group labels used in direction strings, x first.
inline std::pair<std::string_view, std::string_view> group_labels(Comparison c) {
  if (c == Comparison::pure_vs_mixed_paired) return {"PS", "MS"};
  return {"MD", "NMD"};
}

inline constexpr std::string_view kTotalItem = "Total App Time";

/// Seconds per item for one user within one session type.
struct UsageTally {
  std::map<std::string, double> seconds;
  double total = 0;
};

inline const std::string& item_of(const AppSession& s, Dimension d) {
  return d == Dimension::app ? s.app_id : s.app_category;
}

/// Item time within a session type divided by the user's total time in that type; std::nullopt
/// when the user has no time in the type.
inline std::optional<double> normalize_usage(const UsageTally& tally, const std::string& item) {
  if (!(tally.total > 0)) return std::nullopt;
  auto it = tally.seconds.find(item);
  return it == tally.seconds.end() ? 0.0 : it->second / tally.total;
}

struct BatteryConfig {
  TrimSpec trim;
  double threshold = 0.5;  // share of the test population that must use an item
  DayWindow evening;       // applied to the paired comparison only
  std::vector<std::string> items;  // restrict to these items; empty = all observed

  void validate() const {
    trim.validate();
    evening.validate();
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("inclusion threshold must be in (0, 1]");
  }
};

struct BatteryRow {
  std::string item;
  std::optional<TestResult> result;  // absent for excluded items
  std::string excluded_reason;
  std::size_t users_using = 0;
  std::size_t population = 0;
};

struct BatteryTable {
  Dimension dimension;
  Comparison comparison;
  std::vector<BatteryRow> rows;
  /// Users dropped from the test because a normalization denominator was zero.
  std::vector<std::string> excluded_users;
};

namespace detail {

struct UserTallies {
  UsageTally x;  // PS / MD
  UsageTally y;  // MS (unused for two-sample)
};

inline void tally(UsageTally& t, const AppSession& s, Dimension d, double seconds) {
  if (seconds <= 0) return;
  t.total += seconds;
  t.seconds[d == Dimension::total ? std::string(kTotalItem) : item_of(s, d)] += seconds;
}

}  // namespace detail

inline std::string direction_string(const TestResult& r, Comparison c) {
  const auto [x, y] = group_labels(c);
  if (r.direction == Direction::x_greater) return std::string(x) + ">" + std::string(y);
  if (r.direction == Direction::y_greater) return std::string(y) + ">" + std::string(x);
  return std::string(x) + "=" + std::string(y);
}

/// Report cell: "0.036* PS>MS (0.66)"; excluded rows read "-".
inline std::string battery_cell(const BatteryRow& row, Comparison c) {
  if (!row.result) return "-";
  const auto& r = *row.result;
  std::string cell = text::fixed(r.p_value, 3) + significance_stars(r.p_value) + " " + direction_string(r, c);
  if (r.effect_size) cell += " (" + text::fixed(*r.effect_size, 2) + ")";
  return cell;
}

/// Runs one column of robust tests (one row per item).
///
/// pure_vs_mixed_paired: multidevice users' smartphone time, clipped to the evening window, in pure
/// vs mixed usage sessions, normalized per user and session type; paired test on the shares.
/// md_vs_nmd_*: minutes per active day per item for multidevice vs smartphone-only users, over all
/// devices or smartphones only; two-sample test.
inline BatteryTable test_battery(const ConstructedPanel& panel, const UserIndex& index, Dimension dim, Comparison cmp,
                                 const BatteryConfig& cfg) {
  cfg.validate();
  if (cmp == Comparison::pure_vs_mixed_paired && dim == Dimension::total)
    throw std::invalid_argument("normalized total time is identically 1; use category or app");
  BatteryTable table{dim, cmp, {}, {}};

  std::map<std::string, detail::UserTallies> tallies;
  for (const auto& u : panel.usage_sessions) {
    auto info = index.find(u.user_id);
    if (info == index.end()) continue;
    const bool md_user = info->second.multidevice_user();
    if (cmp == Comparison::pure_vs_mixed_paired) {
      if (!md_user || u.device_type != DeviceType::smartphone) continue;
      auto& t = tallies[u.user_id];
      for (const auto& a : u.app_sessions) {
        const double secs = static_cast<double>(
            window_overlap(a.interval.start(), a.interval.end(), info->second.utc_offset, cfg.evening));
        detail::tally(u.purity == Purity::pure ? t.x : t.y, a, dim, secs);
      }
    } else {
      const bool nmd_user = info->second.has_smartphone && !info->second.has_tablet;
      if (!md_user && !nmd_user) continue;
      if (cmp == Comparison::md_vs_nmd_smartphone && u.device_type != DeviceType::smartphone) continue;
      auto& t = tallies[u.user_id];
      for (const auto& a : u.app_sessions) detail::tally(t.x, a, dim, static_cast<double>(a.interval.duration()));
    }
  }
  // Two-sample populations contain every eligible user, including ones with no time.
  if (cmp != Comparison::pure_vs_mixed_paired)
    for (const auto& [user, info] : index)
      if (info.has_smartphone) tallies[user];

  std::vector<std::string> users;
  for (const auto& [user, t] : tallies) {
    if (cmp == Comparison::pure_vs_mixed_paired && (!(t.x.total > 0) || !(t.y.total > 0))) {
      table.excluded_users.push_back(user);
      continue;
    }
    users.push_back(user);
  }

  std::set<std::string> items;
  if (!cfg.items.empty()) {
    items.insert(cfg.items.begin(), cfg.items.end());
  } else if (dim == Dimension::total) {
    items.insert(std::string(kTotalItem));
  } else {
    for (const auto& u : users)
      for (const auto& t : {&tallies[u].x, &tallies[u].y})
        for (const auto& [k, v] : t->seconds) items.insert(k);
  }

  for (const auto& item : items) {
    BatteryRow row{item, std::nullopt, "", 0, users.size()};
    std::vector<double> x, y;
    std::set<std::string> md_n;
    for (const auto& u : users) {
      const auto& t = tallies[u];
      const bool used = (t.x.seconds.count(item) && t.x.seconds.at(item) > 0) ||
                        (t.y.seconds.count(item) && t.y.seconds.at(item) > 0);
      row.users_using += used;
      if (cmp == Comparison::pure_vs_mixed_paired) {
        x.push_back(*normalize_usage(t.x, item));
        y.push_back(*normalize_usage(t.y, item));
      } else {
        auto it = t.x.seconds.find(item);
        const double minutes = (it == t.x.seconds.end() ? 0.0 : it->second) / 60.0 / index.at(u).active_days();
        (index.at(u).multidevice_user() ? x : y).push_back(minutes);
      }
    }
    const double share = users.empty() ? 0.0 : static_cast<double>(row.users_using) / static_cast<double>(users.size());
    if (dim != Dimension::total && share < cfg.threshold) {
      row.excluded_reason = "below inclusion threshold (" + text::fixed(100.0 * share, 1) + "% of users)";
    } else if (cmp == Comparison::pure_vs_mixed_paired ? x.size() < 5 : (x.size() < 5 || y.size() < 5)) {
      row.excluded_reason = "fewer than 5 users per group";
    } else {
      TrimSpec spec = cfg.trim;
      spec.seed = derive_seed(cfg.trim.seed, std::string(to_string(cmp)) + "/" + std::string(to_string(dim)) + "/" + item);
      row.result = cmp == Comparison::pure_vs_mixed_paired ? paired_bootstrap_test(x, y, spec)
                                                           : two_sample_bootstrap_test(x, y, spec);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Trimmed means of per-user minutes per day that feed the substitution split.
struct DailyUsageMeans {
  double nmd_smartphone = 0;
  double md_smartphone = 0;
  double md_tablet = 0;
  double md_all = 0;
  std::size_t md_users = 0;
  std::size_t nmd_users = 0;
};

inline DailyUsageMeans daily_usage_means(const ConstructedPanel& panel, const UserIndex& index, double gamma) {
  std::map<std::string, std::array<double, 2>> secs;
  for (const auto& u : panel.usage_sessions) secs[u.user_id][row_of(u.device_type)] += static_cast<double>(u.interaction_seconds());
  std::vector<double> nmd_sp, md_sp, md_tab, md_all;
  for (const auto& [user, info] : index) {
    const auto s = secs[user];
    const double days = info.active_days();
    if (info.multidevice_user()) {
      md_sp.push_back(s[0] / 60.0 / days);
      md_tab.push_back(s[1] / 60.0 / days);
      md_all.push_back((s[0] + s[1]) / 60.0 / days);
    } else if (info.has_smartphone) {
      nmd_sp.push_back(s[0] / 60.0 / days);
    }
  }
  if (md_sp.empty() || nmd_sp.empty()) throw DataError("daily usage means need both multidevice and smartphone-only users");
  DailyUsageMeans m;
  m.nmd_smartphone = trimmed_mean(nmd_sp, gamma);
  m.md_smartphone = trimmed_mean(md_sp, gamma);
  m.md_tablet = trimmed_mean(md_tab, gamma);
  m.md_all = trimmed_mean(md_all, gamma);
  m.md_users = md_sp.size();
  m.nmd_users = nmd_sp.size();
  return m;
}

}  // namespace mdsession
