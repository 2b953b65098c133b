#pragma once

#include <algorithm>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdsession/interval.hpp"
#include "mdsession/text.hpp"

namespace mdsession {

enum class DeviceType : std::uint8_t { smartphone, tablet };
enum class Platform : std::uint8_t { android, ios, other };
enum class EventKind : std::uint8_t { foreground, background, screen_off };

inline constexpr std::array<DeviceType, 2> kDeviceTypes = {DeviceType::smartphone, DeviceType::tablet};

inline std::string_view to_string(DeviceType t) { return t == DeviceType::smartphone ? "smartphone" : "tablet"; }

inline std::string_view to_string(Platform p) {
  switch (p) {
    case Platform::android:
      return "android";
    case Platform::ios:
      return "ios";
    default:
      return "other";
  }
}

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::foreground:
      return "foreground";
    case EventKind::background:
      return "background";
    default:
      return "screen_off";
  }
}

inline std::optional<DeviceType> parse_device_type(std::string_view s) {
  if (s == "smartphone") return DeviceType::smartphone;
  if (s == "tablet") return DeviceType::tablet;
  return std::nullopt;
}

inline std::optional<Platform> parse_platform(std::string_view s) {
  if (s == "android") return Platform::android;
  if (s == "ios") return Platform::ios;
  if (s == "other") return Platform::other;
  return std::nullopt;
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  if (s == "foreground") return EventKind::foreground;
  if (s == "background") return EventKind::background;
  if (s == "screen_off") return EventKind::screen_off;
  return std::nullopt;
}

struct AppEvent {
  std::string user_id;
  std::string device_id;
  DeviceType device_type = DeviceType::smartphone;
  Platform platform = Platform::other;
  std::string app_id;
  std::string app_category;
  Instant timestamp = 0;
  EventKind kind = EventKind::foreground;
  std::size_t line = 0;  // source line, 0 when not read from a file

  friend bool operator==(const AppEvent& a, const AppEvent& b) {
    return a.user_id == b.user_id && a.device_id == b.device_id && a.device_type == b.device_type &&
           a.platform == b.platform && a.app_id == b.app_id && a.app_category == b.app_category &&
           a.timestamp == b.timestamp && a.kind == b.kind;
  }
};

/// One foreground interval of one app on one device.
struct AppSession {
  std::string user_id;
  std::string device_id;
  DeviceType device_type;
  Platform platform;
  std::string app_id;
  std::string app_category;
  Interval interval;

  friend bool operator==(const AppSession&, const AppSession&) = default;
};

struct Diagnostic {
  std::string stage;
  std::size_t line = 0;
  std::string message;
  std::string user_id;
  std::string device_id;
};

class Diagnostics {
 public:
  void add(std::string stage, std::size_t line, std::string message, std::string user = {},
           std::string device = {}) {
    items_.push_back({std::move(stage), line, std::move(message), std::move(user), std::move(device)});
  }
  const std::vector<Diagnostic>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t count(std::string_view stage) const {
    return static_cast<std::size_t>(
        std::count_if(items_.begin(), items_.end(), [&](const Diagnostic& d) { return d.stage == stage; }));
  }

  void write_jsonl(std::ostream& os) const {
    for (const auto& d : items_) {
      nlohmann::ordered_json j;
      j["stage"] = d.stage;
      j["line"] = d.line;
      j["message"] = d.message;
      if (!d.user_id.empty()) j["user_id"] = d.user_id;
      if (!d.device_id.empty()) j["device_id"] = d.device_id;
      os << j.dump() << '\n';
    }
  }

 private:
  std::vector<Diagnostic> items_;
};

/// Calendar window of the panel plus the activity rule. Dates are day indices since 1970-01-01 (UTC).
struct PanelWindow {
  std::optional<std::int64_t> start_day;
  std::optional<std::int64_t> end_day;  // inclusive
  int min_active_span_days = 23;

  void validate() const {
    if (start_day && end_day && *start_day >= *end_day)
      throw std::invalid_argument("panel window requires start_date < end_date");
    if (min_active_span_days < 0) throw std::invalid_argument("min_active_span_days must be >= 0");
  }
  bool contains(Instant t) const {
    const std::int64_t day = text::floor_div(t, 86400);
    return (!start_day || day >= *start_day) && (!end_day || day <= *end_day);
  }
};

enum class EventFormat { jsonl, csv };

inline constexpr std::string_view kEventCsvHeader = "user_id,device_id,device_type,platform,app_id,app_category,ts,kind";
inline constexpr std::string_view kSessionCsvHeader =
    "user_id,device_id,device_type,platform,app_id,app_category,start,end";

namespace detail {

inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline bool blank(std::string_view s) { return text::trim(s).empty(); }

// Fills the enum/identity fields shared by events and sessions; returns an error message or empty.
inline std::string fill_common(const std::string& user, const std::string& device, std::string_view type,
                               std::string_view platform, DeviceType& t, Platform& p) {
  if (user.empty()) return "empty user_id";
  if (device.empty()) return "empty device_id";
  const auto dt = parse_device_type(type);
  if (!dt) return "unknown device_type '" + std::string(type) + "'";
  const auto pl = parse_platform(platform);
  if (!pl) return "unknown platform '" + std::string(platform) + "'";
  t = *dt;
  p = *pl;
  return {};
}

inline std::string event_from_json(const nlohmann::json& j, AppEvent& e) {
  if (!j.is_object()) return "line is not a JSON object";
  auto str = [&](const char* key, std::string& out) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) return std::string("missing key '") + key + "'";
    if (!it->is_string()) return std::string("key '") + key + "' must be a string";
    out = it->get<std::string>();
    return {};
  };
  std::string type, platform, kind;
  for (auto [key, out] : {std::pair{"user_id", &e.user_id}, std::pair{"device_id", &e.device_id},
                          std::pair{"device_type", &type}, std::pair{"platform", &platform},
                          std::pair{"app_id", &e.app_id}, std::pair{"app_category", &e.app_category},
                          std::pair{"kind", &kind}}) {
    if (auto err = str(key, *out); !err.empty()) return err;
  }
  if (auto err = fill_common(e.user_id, e.device_id, type, platform, e.device_type, e.platform); !err.empty())
    return err;
  const auto k = parse_event_kind(kind);
  if (!k) return "unknown kind '" + kind + "'";
  e.kind = *k;
  auto ts = j.find("ts");
  if (ts == j.end()) return "missing key 'ts'";
  if (ts->is_number_integer()) {
    e.timestamp = ts->get<std::int64_t>();
  } else if (ts->is_number_float()) {
    e.timestamp = static_cast<Instant>(ts->get<double>());
  } else {
    return "key 'ts' must be a number";
  }
  if (e.timestamp < 0) return "negative timestamp";
  return {};
}

}  // namespace detail

/// Reads raw monitoring events. Rows violating the schema are skipped and reported; broken
/// syntax (invalid JSON, missing CSV header) throws FormatError with the position.
inline std::vector<AppEvent> parse_events(std::istream& in, EventFormat format, Diagnostics& diag,
                                          const PanelWindow& window = {}) {
  std::vector<AppEvent> events;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> fields;

  auto accept = [&](AppEvent&& e) {
    if (!window.contains(e.timestamp)) {
      diag.add("parse", lineno, "timestamp outside panel window", e.user_id, e.device_id);
      return;
    }
    e.line = lineno;
    events.push_back(std::move(e));
  };

  if (format == EventFormat::jsonl) {
    while (detail::read_line(in, line)) {
      ++lineno;
      if (detail::blank(line)) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& ex) {
        throw FormatError(std::string("invalid JSON: ") + ex.what(), lineno);
      }
      AppEvent e;
      if (auto err = detail::event_from_json(j, e); !err.empty()) {
        diag.add("parse", lineno, err);
        continue;
      }
      accept(std::move(e));
    }
    return events;
  }

  bool header_seen = false;
  while (detail::read_line(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!header_seen) {
      if (text::trim(line) != kEventCsvHeader) throw FormatError("expected header '" + std::string(kEventCsvHeader) + "'", lineno);
      header_seen = true;
      continue;
    }
    if (!text::split_csv(line, fields)) throw FormatError("unterminated quoted field", lineno);
    if (fields.size() != 8) {
      diag.add("parse", lineno, "expected 8 fields, got " + std::to_string(fields.size()));
      continue;
    }
    AppEvent e;
    e.user_id = fields[0];
    e.device_id = fields[1];
    e.app_id = fields[4];
    e.app_category = fields[5];
    if (auto err = detail::fill_common(e.user_id, e.device_id, fields[2], fields[3], e.device_type, e.platform);
        !err.empty()) {
      diag.add("parse", lineno, err);
      continue;
    }
    std::int64_t ts = 0;
    if (!text::parse_int64(fields[6], ts) || ts < 0) {
      diag.add("parse", lineno, "invalid ts '" + fields[6] + "'");
      continue;
    }
    e.timestamp = ts;
    const auto k = parse_event_kind(fields[7]);
    if (!k) {
      diag.add("parse", lineno, "unknown kind '" + fields[7] + "'");
      continue;
    }
    e.kind = *k;
    accept(std::move(e));
  }
  return events;
}

inline void write_events_jsonl(std::ostream& os, std::span<const AppEvent> events) {
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["user_id"] = e.user_id;
    j["device_id"] = e.device_id;
    j["device_type"] = to_string(e.device_type);
    j["platform"] = to_string(e.platform);
    j["app_id"] = e.app_id;
    j["app_category"] = e.app_category;
    j["ts"] = e.timestamp;
    j["kind"] = to_string(e.kind);
    os << j.dump() << '\n';
  }
}

/// Reads pre-paired sessions in the session CSV schema.
inline std::vector<AppSession> parse_sessions(std::istream& in, Diagnostics& diag) {
  std::vector<AppSession> sessions;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<std::string> f;
  while (detail::read_line(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!header_seen) {
      if (text::trim(line) != kSessionCsvHeader)
        throw FormatError("expected header '" + std::string(kSessionCsvHeader) + "'", lineno);
      header_seen = true;
      continue;
    }
    if (!text::split_csv(line, f)) throw FormatError("unterminated quoted field", lineno);
    if (f.size() != 8) {
      diag.add("parse", lineno, "expected 8 fields, got " + std::to_string(f.size()));
      continue;
    }
    DeviceType t;
    Platform p;
    if (auto err = detail::fill_common(f[0], f[1], f[2], f[3], t, p); !err.empty()) {
      diag.add("parse", lineno, err);
      continue;
    }
    std::int64_t start = 0, end = 0;
    if (!text::parse_int64(f[6], start) || !text::parse_int64(f[7], end) || start < 0) {
      diag.add("parse", lineno, "invalid start/end");
      continue;
    }
    if (start >= end) {
      diag.add("parse", lineno, "session requires start < end", f[0], f[1]);
      continue;
    }
    sessions.push_back({f[0], f[1], t, p, f[4], f[5], Interval(start, end)});
  }
  return sessions;
}

inline void write_sessions(std::ostream& os, std::span<const AppSession> sessions) {
  os << kSessionCsvHeader << '\n';
  for (const auto& s : sessions) {
    os << text::csv_field(s.user_id) << ',' << text::csv_field(s.device_id) << ',' << to_string(s.device_type) << ','
       << to_string(s.platform) << ',' << text::csv_field(s.app_id) << ',' << text::csv_field(s.app_category) << ','
       << s.interval.start() << ',' << s.interval.end() << '\n';
  }
}

namespace detail {

inline bool session_order(const AppSession& a, const AppSession& b) {
  if (a.user_id != b.user_id) return a.user_id < b.user_id;
  if (a.device_id != b.device_id) return a.device_id < b.device_id;
  return a.interval.start() < b.interval.start();
}

}  // namespace detail

/// Pairs foreground/background events into app sessions. A session closes at the first of: the
/// matching background event, the next foreground event on the device, or screen_off.
/// Output is ordered by (user, device, start).
inline std::vector<AppSession> pair_sessions(std::span<const AppEvent> events, Diagnostics& diag) {
  std::map<std::pair<std::string, std::string>, std::vector<const AppEvent*>> per_device;
  for (const auto& e : events) per_device[{e.user_id, e.device_id}].push_back(&e);

  std::vector<AppSession> out;
  for (auto& [key, evs] : per_device) {
    std::stable_sort(evs.begin(), evs.end(),
                     [](const AppEvent* a, const AppEvent* b) { return a->timestamp < b->timestamp; });
    const DeviceType type = evs.front()->device_type;
    const AppEvent* open = nullptr;

    auto close = [&](Instant at, const AppEvent& by) {
      if (at > open->timestamp) {
        out.push_back({open->user_id, open->device_id, type, open->platform, open->app_id, open->app_category,
                       Interval(open->timestamp, at)});
      } else {
        diag.add("pair", by.line, "zero-duration app session for '" + open->app_id + "' dropped", key.first,
                 key.second);
      }
      open = nullptr;
    };

    for (const AppEvent* e : evs) {
      if (e->device_type != type) {
        diag.add("pair", e->line, "device_type conflicts with earlier events of this device; event skipped",
                 key.first, key.second);
        continue;
      }
      switch (e->kind) {
        case EventKind::foreground:
          if (open) close(e->timestamp, *e);
          open = e;
          break;
        case EventKind::background:
          if (!open) {
            diag.add("pair", e->line, "background event with no open session", key.first, key.second);
          } else if (open->app_id != e->app_id) {
            diag.add("pair", e->line, "background event for '" + e->app_id + "' while '" + open->app_id + "' is open",
                     key.first, key.second);
          } else {
            close(e->timestamp, *e);
          }
          break;
        case EventKind::screen_off:
          if (!open) {
            diag.add("pair", e->line, "screen_off with no open session", key.first, key.second);
          } else {
            close(e->timestamp, *e);
          }
          break;
      }
    }
    if (open) {
      diag.add("pair", open->line, "session for '" + open->app_id + "' never closed; dropped", key.first, key.second);
    }
  }
  std::stable_sort(out.begin(), out.end(), detail::session_order);
  return out;
}

/// Sorts sessions per device and resolves same-device overlaps by truncating the earlier
/// session at the later one's start. Sessions truncated to zero length are dropped.
inline std::vector<AppSession> normalize(std::vector<AppSession> sessions, Diagnostics& diag) {
  std::stable_sort(sessions.begin(), sessions.end(), detail::session_order);
  std::vector<AppSession> out;
  out.reserve(sessions.size());
  for (auto& s : sessions) {
    while (!out.empty() && out.back().user_id == s.user_id && out.back().device_id == s.device_id &&
           out.back().interval.end() > s.interval.start()) {
      AppSession& prev = out.back();
      if (prev.interval.start() < s.interval.start()) {
        diag.add("normalize", 0,
                 "truncated '" + prev.app_id + "' at " + std::to_string(prev.interval.start()) + " from end " +
                     std::to_string(prev.interval.end()) + " to " + std::to_string(s.interval.start()),
                 prev.user_id, prev.device_id);
        prev.interval = Interval(prev.interval.start(), s.interval.start());
        break;
      }
      diag.add("normalize", 0,
               "dropped '" + prev.app_id + "' at " + std::to_string(prev.interval.start()) +
                   ": truncation leaves zero duration",
               prev.user_id, prev.device_id);
      out.pop_back();
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct ActivityFilterResult {
  std::set<std::string> retained;
  std::set<std::string> dropped;
};

/// A user is retained iff on every device they own the calendar span between the first and the
/// last usage day is at least `min_active_span_days`.
inline ActivityFilterResult filter_active(std::span<const AppSession> sessions, int min_active_span_days) {
  struct Span {
    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
  };
  std::map<std::string, std::map<std::string, Span>> spans;
  for (const auto& s : sessions) {
    Span& sp = spans[s.user_id][s.device_id];
    sp.first = std::min(sp.first, text::floor_div(s.interval.start(), 86400));
    sp.last = std::max(sp.last, text::floor_div(s.interval.end() - 1, 86400));
  }
  ActivityFilterResult r;
  for (const auto& [user, devices] : spans) {
    const bool active = std::all_of(devices.begin(), devices.end(),
                                    [&](const auto& d) { return d.second.last - d.second.first >= min_active_span_days; });
    (active ? r.retained : r.dropped).insert(user);
  }
  return r;
}

inline std::vector<AppSession> retain_users(std::span<const AppSession> sessions, const std::set<std::string>& users) {
  std::vector<AppSession> out;
  for (const auto& s : sessions)
    if (users.count(s.user_id)) out.push_back(s);
  return out;
}

}  // namespace mdsession
