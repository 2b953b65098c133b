#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdsession/ingestion.hpp"
#include "mdsession/interval.hpp"

namespace mdsession {

inline constexpr Seconds kDefaultTimeoutWindow = 60;

enum class Purity : std::uint8_t { pure, mixed };

inline std::string_view to_string(Purity p) { return p == Purity::pure ? "pure" : "mixed"; }

/// Timeout-merged run of app sessions on one device.
struct UsageSession {
  std::size_t id = 0;
  std::string user_id;
  std::string device_id;
  DeviceType device_type;
  std::vector<AppSession> app_sessions;
  Interval interval;
  Purity purity = Purity::pure;
  std::optional<std::size_t> md_session;  // id of the containing multidevice session

  explicit UsageSession(const AppSession& first)
      : user_id(first.user_id),
        device_id(first.device_id),
        device_type(first.device_type),
        app_sessions{first},
        interval(first.interval) {}

  Seconds interaction_seconds() const {
    Seconds total = 0;
    for (const auto& a : app_sessions) total += a.interval.duration();
    return total;
  }
};

/// Connected component of usage sessions spanning at least two device types.
/// Members are indices into the usage-session list the component was built from.
struct MultideviceSession {
  std::size_t id = 0;
  std::string user_id;
  std::vector<std::size_t> members;
  Interval interval;
  std::size_t app_session_count = 0;
  Seconds interaction_seconds = 0;
};

/// Greedy left-to-right merge of one device's normalized app sessions: an app session joins the
/// current usage session iff it meets or follows the previous one with a gap of at most `tw`.
inline std::vector<UsageSession> build_usage_sessions(std::span<const AppSession> device_sessions, Seconds tw) {
  if (tw < 0) throw std::invalid_argument("timeout window must be non-negative");
  std::vector<UsageSession> out;
  for (std::size_t i = 0; i < device_sessions.size(); ++i) {
    const AppSession& a = device_sessions[i];
    if (i > 0) {
      const AppSession& prev = device_sessions[i - 1];
      if (prev.user_id != a.user_id || prev.device_id != a.device_id)
        throw std::invalid_argument("build_usage_sessions expects app sessions of a single device");
      if (a.interval.start() < prev.interval.end())
        throw std::invalid_argument("build_usage_sessions expects sorted, non-overlapping app sessions");
    }
    if (!out.empty() && link(out.back().app_sessions.back().interval, a.interval, tw).linked) {
      UsageSession& cur = out.back();
      cur.app_sessions.push_back(a);
      cur.interval = Interval(cur.interval.start(), a.interval.end());
    } else {
      out.emplace_back(a);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

struct MultideviceBuild {
  std::vector<MultideviceSession> md_sessions;
  std::vector<UsageSession> usage_sessions;  // input order, purity and md_session filled in
};

/// Second construction step for one user: connected components of the graph whose edges join
/// linked usage sessions of different devices. Components covering both device types become
/// multidevice sessions (ids 0.. in order of start) and their members are marked mixed.
inline MultideviceBuild build_multidevice_sessions(std::vector<UsageSession> sessions, Seconds tw) {
  if (tw < 0) throw std::invalid_argument("timeout window must be non-negative");
  const std::size_t n = sessions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sessions[a].interval.start() < sessions[b].interval.start();
  });

  detail::DisjointSets sets(n);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const UsageSession& a = sessions[order[oi]];
    for (std::size_t oj = oi + 1; oj < n; ++oj) {
      const UsageSession& b = sessions[order[oj]];
      if (b.interval.start() > a.interval.end() + tw) break;
      if (a.device_id != b.device_id) sets.unite(order[oi], order[oj]);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[sets.find(i)].push_back(i);

  MultideviceBuild out;
  for (auto& [root, members] : components) {
    bool has_phone = false, has_tablet = false;
    for (std::size_t m : members) {
      has_phone |= sessions[m].device_type == DeviceType::smartphone;
      has_tablet |= sessions[m].device_type == DeviceType::tablet;
    }
    if (!(has_phone && has_tablet)) continue;
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      if (sessions[a].interval.start() != sessions[b].interval.start())
        return sessions[a].interval.start() < sessions[b].interval.start();
      return sessions[a].device_id < sessions[b].device_id;
    });
    MultideviceSession md{0, sessions[members.front()].user_id, members, sessions[members.front()].interval, 0, 0};
    for (std::size_t m : members) {
      md.interval = md.interval.hull(sessions[m].interval);
      md.app_session_count += sessions[m].app_sessions.size();
      md.interaction_seconds += sessions[m].interaction_seconds();
    }
    out.md_sessions.push_back(std::move(md));
  }
  std::stable_sort(out.md_sessions.begin(), out.md_sessions.end(),
                   [](const MultideviceSession& a, const MultideviceSession& b) {
                     return a.interval.start() < b.interval.start();
                   });
  for (std::size_t k = 0; k < out.md_sessions.size(); ++k) {
    out.md_sessions[k].id = k;
    for (std::size_t m : out.md_sessions[k].members) {
      sessions[m].purity = Purity::mixed;
      sessions[m].md_session = k;
    }
  }
  out.usage_sessions = std::move(sessions);
  return out;
}

/// Fully constructed panel. Usage sessions are ordered by (user, device, start); multidevice
/// sessions by (user, start); ids equal positions and member indices refer to `usage_sessions`.
struct ConstructedPanel {
  Seconds tw = kDefaultTimeoutWindow;
  std::vector<UsageSession> usage_sessions;
  std::vector<MultideviceSession> md_sessions;

  std::vector<const UsageSession*> members(const MultideviceSession& md) const {
    std::vector<const UsageSession*> r;
    r.reserve(md.members.size());
    for (std::size_t m : md.members) r.push_back(&usage_sessions[m]);
    return r;
  }
  std::size_t app_session_count() const {
    std::size_t n = 0;
    for (const auto& u : usage_sessions) n += u.app_sessions.size();
    return n;
  }
};

/// Runs both construction steps for every user. Input must be normalized.
inline ConstructedPanel construct_panel(std::span<const AppSession> app_sessions, Seconds tw = kDefaultTimeoutWindow) {
  ConstructedPanel panel;
  panel.tw = tw;
  std::size_t i = 0;
  while (i < app_sessions.size()) {
    const std::string& user = app_sessions[i].user_id;
    std::vector<UsageSession> user_sessions;
    while (i < app_sessions.size() && app_sessions[i].user_id == user) {
      std::size_t j = i;
      while (j < app_sessions.size() && app_sessions[j].user_id == user &&
             app_sessions[j].device_id == app_sessions[i].device_id)
        ++j;
      auto device = build_usage_sessions(app_sessions.subspan(i, j - i), tw);
      std::move(device.begin(), device.end(), std::back_inserter(user_sessions));
      i = j;
    }
    const std::size_t usage_base = panel.usage_sessions.size();
    const std::size_t md_base = panel.md_sessions.size();
    auto built = build_multidevice_sessions(std::move(user_sessions), tw);
    for (auto& u : built.usage_sessions) {
      u.id = panel.usage_sessions.size();
      if (u.md_session) *u.md_session += md_base;
      panel.usage_sessions.push_back(std::move(u));
    }
    for (auto& md : built.md_sessions) {
      md.id += md_base;
      for (auto& m : md.members) m += usage_base;
      panel.md_sessions.push_back(std::move(md));
    }
  }
  return panel;
}

/// Relation counts for one share table of the construction statistics.
struct RelationShares {
  std::array<std::uint64_t, kRelationLabelCount> counts{};

  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
  void add(RelationLabel r) { ++counts[static_cast<std::size_t>(r)]; }
  std::uint64_t count(RelationLabel r) const { return counts[static_cast<std::size_t>(r)]; }
  /// Percentage of the total; 0 when empty.
  double percent(RelationLabel r) const {
    const auto t = total();
    return t == 0 ? 0.0 : 100.0 * static_cast<double>(count(r)) / static_cast<double>(t);
  }
};

struct ConstructionStats {
  struct Column {
    std::uint64_t app_sessions = 0;
    std::uint64_t usage_sessions = 0;
    std::uint64_t md_sessions = 0;
    RelationShares shares;
  };
  Column smartphone;
  Column tablet;
  Column multidevice;  // app/usage sessions contained in multidevice sessions
};

/// Table-style construction statistics. Single-device shares count each adjacent linked app-session
/// pair from both directions; multidevice shares count every (smartphone, tablet) member pair of a
/// multidevice session, oriented "smartphone session [relation] tablet session".
inline ConstructionStats construction_stats(const ConstructedPanel& panel) {
  ConstructionStats st;
  for (const auto& u : panel.usage_sessions) {
    auto& col = u.device_type == DeviceType::smartphone ? st.smartphone : st.tablet;
    col.app_sessions += u.app_sessions.size();
    col.usage_sessions += 1;
    for (std::size_t k = 1; k < u.app_sessions.size(); ++k) {
      const auto v = link(u.app_sessions[k - 1].interval, u.app_sessions[k].interval, panel.tw);
      if (v.relation == AllenRelation::meets) {
        col.shares.add(RelationLabel::meets);
        col.shares.add(RelationLabel::metBy);
      } else {
        col.shares.add(RelationLabel::precedesWithinTW);
        col.shares.add(RelationLabel::precededByWithinTW);
      }
    }
  }
  for (const auto& md : panel.md_sessions) {
    st.multidevice.md_sessions += 1;
    st.multidevice.usage_sessions += md.members.size();
    st.multidevice.app_sessions += md.app_session_count;
    for (std::size_t a : md.members) {
      const auto& s = panel.usage_sessions[a];
      if (s.device_type != DeviceType::smartphone) continue;
      for (std::size_t b : md.members) {
        const auto& t = panel.usage_sessions[b];
        if (t.device_type != DeviceType::tablet) continue;
        st.multidevice.shares.add(label_of(link(s.interval, t.interval, panel.tw)));
      }
    }
  }
  return st;
}

inline void write_usage_sessions_jsonl(std::ostream& os, const ConstructedPanel& panel) {
  for (const auto& u : panel.usage_sessions) {
    nlohmann::ordered_json j;
    j["id"] = u.id;
    j["user_id"] = u.user_id;
    j["device_id"] = u.device_id;
    j["device_type"] = to_string(u.device_type);
    j["start"] = u.interval.start();
    j["end"] = u.interval.end();
    j["purity"] = to_string(u.purity);
    j["md_session"] = u.md_session ? nlohmann::ordered_json(*u.md_session) : nlohmann::ordered_json(nullptr);
    j["app_session_count"] = u.app_sessions.size();
    j["interaction_seconds"] = u.interaction_seconds();
    auto apps = nlohmann::ordered_json::array();
    for (const auto& a : u.app_sessions) apps.push_back({{"app_id", a.app_id}, {"start", a.interval.start()}, {"end", a.interval.end()}});
    j["app_sessions"] = std::move(apps);
    os << j.dump() << '\n';
  }
}

inline void write_md_sessions_jsonl(std::ostream& os, const ConstructedPanel& panel) {
  for (const auto& md : panel.md_sessions) {
    nlohmann::ordered_json j;
    j["id"] = md.id;
    j["user_id"] = md.user_id;
    j["start"] = md.interval.start();
    j["end"] = md.interval.end();
    j["members"] = md.members;
    j["app_session_count"] = md.app_session_count;
    j["interaction_seconds"] = md.interaction_seconds;
    os << j.dump() << '\n';
  }
}

}  // namespace mdsession
