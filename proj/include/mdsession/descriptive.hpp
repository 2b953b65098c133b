#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mdsession/sessions.hpp"
#include "mdsession/text.hpp"

namespace mdsession {

enum class SessionClass : std::uint8_t { smartphone_all, tablet_all, smartphone_pure, tablet_pure, multidevice };

inline constexpr std::array<SessionClass, 5> kSessionClasses = {
    SessionClass::smartphone_all, SessionClass::tablet_all, SessionClass::smartphone_pure, SessionClass::tablet_pure,
    SessionClass::multidevice};

inline std::string_view to_string(SessionClass c) {
  static constexpr std::array<std::string_view, 5> names = {"smartphone_all", "tablet_all", "smartphone_pure",
                                                            "tablet_pure", "multidevice"};
  return names[static_cast<std::size_t>(c)];
}

/// Per-user facts needed for per-day rates and local time.
struct UserInfo {
  bool has_smartphone = false;
  bool has_tablet = false;
  std::int64_t first_day = 0;  // UTC day index of first usage
  std::int64_t last_day = 0;   // UTC day index of last usage
  Seconds utc_offset = 0;

  bool multidevice_user() const { return has_smartphone && has_tablet; }
  /// Active span in days, first to last usage day inclusive.
  double active_days() const { return static_cast<double>(last_day - first_day + 1); }
};

using UserIndex = std::map<std::string, UserInfo>;

inline UserIndex index_users(const ConstructedPanel& panel, const std::map<std::string, Seconds>& utc_offsets = {}) {
  UserIndex idx;
  for (const auto& u : panel.usage_sessions) {
    auto [it, fresh] = idx.try_emplace(u.user_id);
    UserInfo& info = it->second;
    const std::int64_t first = text::floor_div(u.interval.start(), 86400);
    const std::int64_t last = text::floor_div(u.interval.end() - 1, 86400);
    if (fresh) {
      info.first_day = first;
      info.last_day = last;
      if (auto o = utc_offsets.find(u.user_id); o != utc_offsets.end()) info.utc_offset = o->second;
    }
    info.first_day = std::min(info.first_day, first);
    info.last_day = std::max(info.last_day, last);
    (u.device_type == DeviceType::smartphone ? info.has_smartphone : info.has_tablet) = true;
  }
  return idx;
}

/// Users owning both device types (multidevice users) or only smartphones.
inline std::set<std::string> population(const UserIndex& idx, bool multidevice) {
  std::set<std::string> out;
  for (const auto& [user, info] : idx)
    if (info.multidevice_user() == multidevice) out.insert(user);
  return out;
}

/// A session viewed uniformly: a usage session or a multidevice session.
struct SessionRecord {
  const std::string* user_id;
  Interval hull;
  std::size_t app_sessions;
  Seconds interaction_seconds;
  std::vector<const AppSession*> parts;
};

/// Sessions of one class, optionally restricted to a user set.
inline std::vector<SessionRecord> records_of(const ConstructedPanel& panel, SessionClass cls,
                                             const std::set<std::string>* users = nullptr) {
  std::vector<SessionRecord> out;
  auto keep = [&](const std::string& u) { return users == nullptr || users->count(u) > 0; };
  if (cls == SessionClass::multidevice) {
    for (const auto& md : panel.md_sessions) {
      if (!keep(md.user_id)) continue;
      SessionRecord r{&md.user_id, md.interval, md.app_session_count, md.interaction_seconds, {}};
      for (const UsageSession* u : panel.members(md))
        for (const auto& a : u->app_sessions) r.parts.push_back(&a);
      std::stable_sort(r.parts.begin(), r.parts.end(), [](const AppSession* a, const AppSession* b) {
        return a->interval.start() < b->interval.start();
      });
      out.push_back(std::move(r));
    }
    return out;
  }
  const DeviceType want =
      (cls == SessionClass::smartphone_all || cls == SessionClass::smartphone_pure) ? DeviceType::smartphone
                                                                                    : DeviceType::tablet;
  const bool pure_only = cls == SessionClass::smartphone_pure || cls == SessionClass::tablet_pure;
  for (const auto& u : panel.usage_sessions) {
    if (u.device_type != want || !keep(u.user_id)) continue;
    if (pure_only && u.purity != Purity::pure) continue;
    SessionRecord r{&u.user_id, u.interval, u.app_sessions.size(), u.interaction_seconds(), {}};
    for (const auto& a : u.app_sessions) r.parts.push_back(&a);
    out.push_back(std::move(r));
  }
  return out;
}

struct Moments {
  double mean = 0;
  double median = 0;
  double sd = 0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

/// Median averages the two middle values for even n.
inline std::optional<Moments> moments(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  Moments m;
  m.n = v.size();
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  m.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct StatsSummary {
  std::size_t sessions = 0;
  Moments length_seconds;  // hull duration
  Moments app_sessions;    // app sessions per session
  std::uint64_t total_app_sessions = 0;
  Seconds interaction_seconds = 0;  // sum of app-session durations
};

/// Dataset-level summary; std::nullopt marks an empty class.
inline std::optional<StatsSummary> summarize(std::span<const SessionRecord> records) {
  if (records.empty()) return std::nullopt;
  StatsSummary s;
  s.sessions = records.size();
  std::vector<double> len, apps;
  for (const auto& r : records) {
    len.push_back(static_cast<double>(r.hull.duration()));
    apps.push_back(static_cast<double>(r.app_sessions));
    s.total_app_sessions += r.app_sessions;
    s.interaction_seconds += r.interaction_seconds;
  }
  s.length_seconds = *moments(std::move(len));
  s.app_sessions = *moments(std::move(apps));
  return s;
}

enum class ShareBasis : std::uint8_t { app_sessions, usage_sessions, interaction_time };
inline constexpr std::array<ShareBasis, 3> kShareBases = {ShareBasis::app_sessions, ShareBasis::usage_sessions,
                                                          ShareBasis::interaction_time};
inline std::string_view to_string(ShareBasis b) {
  switch (b) {
    case ShareBasis::app_sessions:
      return "app_sessions";
    case ShareBasis::usage_sessions:
      return "usage_sessions";
    default:
      return "interaction_time";
  }
}

/// Percent of all usage per class under each basis. The device partition is
/// {smartphone_all, tablet_all}; the purity partition is {smartphone_pure, tablet_pure, multidevice},
/// where a multidevice session counts once under the usage-session basis.
struct UsageShares {
  // [basis][class]; classes not in the partition stay 0.
  std::array<std::array<double, 5>, 3> percent{};

  double get(ShareBasis b, SessionClass c) const {
    return percent[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
  }
};

inline UsageShares usage_shares(const ConstructedPanel& panel, const std::set<std::string>* users = nullptr) {
  std::array<std::array<double, 5>, 3> raw{};
  auto add = [&](SessionClass c, double apps, double sessions, double seconds) {
    raw[0][static_cast<std::size_t>(c)] += apps;
    raw[1][static_cast<std::size_t>(c)] += sessions;
    raw[2][static_cast<std::size_t>(c)] += seconds;
  };
  for (const auto& u : panel.usage_sessions) {
    if (users && !users->count(u.user_id)) continue;
    const double apps = static_cast<double>(u.app_sessions.size());
    const double secs = static_cast<double>(u.interaction_seconds());
    const bool phone = u.device_type == DeviceType::smartphone;
    add(phone ? SessionClass::smartphone_all : SessionClass::tablet_all, apps, 1, secs);
    if (u.purity == Purity::pure) add(phone ? SessionClass::smartphone_pure : SessionClass::tablet_pure, apps, 1, secs);
  }
  for (const auto& md : panel.md_sessions) {
    if (users && !users->count(md.user_id)) continue;
    add(SessionClass::multidevice, static_cast<double>(md.app_session_count), 1,
        static_cast<double>(md.interaction_seconds));
  }
  UsageShares out;
  for (std::size_t b = 0; b < 3; ++b) {
    const double devices = raw[b][0] + raw[b][1];
    const double purity = raw[b][2] + raw[b][3] + raw[b][4];
    for (std::size_t c : {0u, 1u})
      out.percent[b][c] = devices > 0 ? 100.0 * raw[b][c] / devices : 0.0;
    for (std::size_t c : {2u, 3u, 4u})
      out.percent[b][c] = purity > 0 ? 100.0 * raw[b][c] / purity : 0.0;
  }
  return out;
}

/// Per-user summary: moments across users of per-user medians and per-day rates.
struct PerUserSummary {
  std::optional<Moments> median_length_seconds;
  std::optional<Moments> median_app_sessions;
  std::optional<Moments> sessions_per_day;
  std::optional<Moments> interaction_minutes_per_day;
};

/// Rates cover every user in `users` that owns the class's device(s), counting zero for users
/// without such sessions; medians cover users with at least one session.
inline PerUserSummary per_user_summary(const ConstructedPanel& panel, SessionClass cls, const UserIndex& index,
                                       const std::set<std::string>* users = nullptr) {
  const auto recs = records_of(panel, cls, users);
  std::map<std::string, std::vector<const SessionRecord*>> by_user;
  for (const auto& r : recs) by_user[*r.user_id].push_back(&r);

  std::vector<double> med_len, med_apps, per_day, minutes;
  for (const auto& [user, info] : index) {
    if (users && !users->count(user)) continue;
    const bool owns = cls == SessionClass::multidevice ? info.multidevice_user()
                      : (cls == SessionClass::smartphone_all || cls == SessionClass::smartphone_pure) ? info.has_smartphone
                                                                                                    : info.has_tablet;
    if (!owns) continue;
    auto it = by_user.find(user);
    const std::size_t count = it == by_user.end() ? 0 : it->second.size();
    Seconds secs = 0;
    if (count) {
      std::vector<double> l, a;
      for (const auto* r : it->second) {
        l.push_back(static_cast<double>(r->hull.duration()));
        a.push_back(static_cast<double>(r->app_sessions));
        secs += r->interaction_seconds;
      }
      med_len.push_back(moments(std::move(l))->median);
      med_apps.push_back(moments(std::move(a))->median);
    }
    per_day.push_back(static_cast<double>(count) / info.active_days());
    minutes.push_back(static_cast<double>(secs) / 60.0 / info.active_days());
  }
  return {moments(std::move(med_len)), moments(std::move(med_apps)), moments(std::move(per_day)),
          moments(std::move(minutes))};
}

/// Calls f(hour, seconds) for each local hour-of-day overlapped by [start, end).
inline void for_each_hour(Instant start, Instant end, Seconds utc_offset,
                          const std::function<void(int, Seconds)>& f) {
  Instant t = start + utc_offset;
  const Instant stop = end + utc_offset;
  while (t < stop) {
    const Instant next = (text::floor_div(t, 3600) + 1) * 3600;
    const Instant seg_end = std::min(next, stop);
    const int hour = static_cast<int>(text::floor_div(t, 3600) - text::floor_div(t, 86400) * 24);
    f(hour, seg_end - t);
    t = seg_end;
  }
}

struct HourlyDistribution {
  std::array<Seconds, 24> seconds{};
  std::array<double, 24> percent{};
  Seconds total = 0;
};

/// Interaction time apportioned to local hour bins by the overlap of each app session.
inline HourlyDistribution hourly_distribution(std::span<const SessionRecord> records, const UserIndex& index) {
  HourlyDistribution h;
  for (const auto& r : records) {
    auto it = index.find(*r.user_id);
    const Seconds offset = it == index.end() ? 0 : it->second.utc_offset;
    for (const AppSession* a : r.parts) {
      for_each_hour(a->interval.start(), a->interval.end(), offset, [&](int hour, Seconds s) {
        h.seconds[static_cast<std::size_t>(hour)] += s;
      });
    }
  }
  for (auto s : h.seconds) h.total += s;
  for (std::size_t i = 0; i < 24; ++i)
    h.percent[i] = h.total > 0 ? 100.0 * static_cast<double>(h.seconds[i]) / static_cast<double>(h.total) : 0.0;
  return h;
}

struct CdfPoint {
  double value;
  double cumulative;  // share of observations <= value
};

/// Right-continuous ECDF over the distinct values. The median read off it is the smallest value
/// whose cumulative share reaches 0.5 (so [1,2,3,4] reads 2).
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
  if (values.empty()) throw DataError("empirical CDF needs at least one value");
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

inline double cdf_quantile(std::span<const CdfPoint> cdf, double q) {
  for (const auto& p : cdf)
    if (p.cumulative >= q) return p.value;
  return cdf.back().value;
}

/// Gaps between consecutive sessions of a class on the same timeline (device for single-device
/// classes, user for multidevice sessions).
inline std::vector<double> inter_session_times(const ConstructedPanel& panel, SessionClass cls,
                                               const std::set<std::string>* users = nullptr) {
  std::vector<double> gaps;
  if (cls == SessionClass::multidevice) {
    for (std::size_t i = 1; i < panel.md_sessions.size(); ++i) {
      const auto& a = panel.md_sessions[i - 1];
      const auto& b = panel.md_sessions[i];
      if (a.user_id != b.user_id || (users && !users->count(b.user_id))) continue;
      gaps.push_back(static_cast<double>(b.interval.start() - a.interval.end()));
    }
    return gaps;
  }
  const auto recs = records_of(panel, cls, users);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const auto* a = recs[i - 1].parts.front();
    const auto* b = recs[i].parts.front();
    if (a->user_id != b->user_id || a->device_id != b->device_id) continue;
    gaps.push_back(static_cast<double>(recs[i].hull.start() - recs[i - 1].hull.end()));
  }
  return gaps;
}

struct SweepPoint {
  Seconds tw = 0;
  /// Mean number of sessions per user, by class.
  std::array<double, 5> sessions_per_user{};
  /// Mean over users of the per-user mean app sessions per session, by class (users with sessions).
  std::array<double, 5> app_sessions_per_session{};
  /// Single-device usage sessions in the whole panel.
  std::size_t usage_sessions = 0;
  std::size_t md_sessions = 0;
};

inline SweepPoint sweep_point(const ConstructedPanel& panel) {
  SweepPoint p;
  p.tw = panel.tw;
  p.usage_sessions = panel.usage_sessions.size();
  p.md_sessions = panel.md_sessions.size();
  std::set<std::string> users;
  for (const auto& u : panel.usage_sessions) users.insert(u.user_id);
  if (users.empty()) return p;
  for (SessionClass c : kSessionClasses) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_user;  // sessions, app sessions
    for (const auto& r : records_of(panel, c)) {
      auto& e = per_user[*r.user_id];
      e.first += 1;
      e.second += r.app_sessions;
    }
    double sessions = 0, ratio = 0;
    for (const auto& [u, e] : per_user) {
      sessions += static_cast<double>(e.first);
      ratio += static_cast<double>(e.second) / static_cast<double>(e.first);
    }
    const auto i = static_cast<std::size_t>(c);
    p.sessions_per_user[i] = sessions / static_cast<double>(users.size());
    p.app_sessions_per_session[i] = per_user.empty() ? 0.0 : ratio / static_cast<double>(per_user.size());
  }
  return p;
}

inline std::vector<Seconds> default_sweep_grid() { return {1, 3, 10, 30, 60, 100, 300, 1000, 3000, 10000}; }

/// Reconstructs the panel at every timeout in `grid` (normalized app sessions as input).
inline std::vector<SweepPoint> timeout_sweep(std::span<const AppSession> app_sessions, std::span<const Seconds> grid) {
  if (grid.empty()) throw std::invalid_argument("timeout sweep needs at least one timeout value");
  std::vector<SweepPoint> out;
  for (Seconds tw : grid) out.push_back(sweep_point(construct_panel(app_sessions, tw)));
  return out;
}

struct ShareRow {
  std::string name;
  double percent;
};

struct CategoryShareReport {
  std::array<std::vector<ShareRow>, 2> categories;  // indexed by row_of(device)
  std::array<std::vector<ShareRow>, 2> apps;
};

/// Share of each device's interaction time per category and per named app; unnamed apps fall into
/// "Other". With no named apps given, the `top_apps` apps with most overall time are named.
inline CategoryShareReport category_share_report(std::span<const AppSession> sessions,
                                                 std::vector<std::string> named_apps = {}, std::size_t top_apps = 5,
                                                 const std::set<std::string>* users = nullptr) {
  std::array<std::map<std::string, double>, 2> cat, app;
  std::array<double, 2> total{};
  std::map<std::string, double> overall_app;
  for (const auto& s : sessions) {
    if (users && !users->count(s.user_id)) continue;
    const std::size_t r = s.device_type == DeviceType::smartphone ? 0 : 1;
    const double d = static_cast<double>(s.interval.duration());
    cat[r][s.app_category] += d;
    app[r][s.app_id] += d;
    overall_app[s.app_id] += d;
    total[r] += d;
  }
  if (named_apps.empty()) {
    std::vector<std::pair<std::string, double>> ranked(overall_app.begin(), overall_app.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < top_apps; ++i) named_apps.push_back(ranked[i].first);
  }
  auto sorted_rows = [](std::vector<ShareRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ShareRow& a, const ShareRow& b) { return a.percent > b.percent; });
    return rows;
  };
  CategoryShareReport rep;
  for (std::size_t r = 0; r < 2; ++r) {
    if (total[r] <= 0) continue;
    std::vector<ShareRow> c;
    for (const auto& [k, v] : cat[r]) c.push_back({k, 100.0 * v / total[r]});
    rep.categories[r] = sorted_rows(std::move(c));
    std::vector<ShareRow> a;
    double named = 0;
    for (const auto& name : named_apps) {
      auto it = app[r].find(name);
      const double v = it == app[r].end() ? 0.0 : it->second;
      named += v;
      a.push_back({name, 100.0 * v / total[r]});
    }
    a.push_back({"Other", 100.0 * (total[r] - named) / total[r]});
    rep.apps[r] = sorted_rows(std::move(a));
  }
  return rep;
}

}  // namespace mdsession
