#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdsession/ingestion.hpp"
#include "mdsession/patterns.hpp"
#include "mdsession/random.hpp"

namespace mdsession {

enum class DurationFamily { exponential, lognormal };

struct DurationSpec {
  DurationFamily family = DurationFamily::lognormal;
  double mean = 60;   // exponential mean (s)
  double mu = 3.5;    // lognormal log-mean
  double sigma = 1.0;  // lognormal log-sd
  Seconds max_seconds = 3600;

  void validate(const char* what) const {
    if (family == DurationFamily::exponential && !(mean > 0)) throw std::invalid_argument(std::string(what) + ": mean must be > 0");
    if (family == DurationFamily::lognormal && !(sigma > 0)) throw std::invalid_argument(std::string(what) + ": sigma must be > 0");
    if (max_seconds < 1) throw std::invalid_argument(std::string(what) + ": max_seconds must be >= 1");
  }

  Seconds draw(Rng& rng, double scale = 1.0) const {
    const double v = family == DurationFamily::exponential ? rng.exponential(mean) : rng.lognormal(mu, sigma);
    return std::clamp<Seconds>(static_cast<Seconds>(std::ceil(v * scale)), 1, max_seconds);
  }
};

struct CategorySpec {
  std::string name;
  double weight = 1;
  std::vector<std::string> apps;
};

enum class UserGroup { md, nmd, all };

/// Multiplies one category's weight for the matching users/devices/session kinds.
struct PlantedEffect {
  UserGroup population = UserGroup::md;
  std::optional<DeviceType> device;  // any device when absent
  std::optional<Purity> scope;       // pure episodes or multidevice episodes; any when absent
  std::string category;
  double factor = 1;
};

struct PanelSpec {
  std::uint64_t seed = 1;
  std::string start_date = "2015-03-02";
  int days = 30;
  int md_users = 20;
  int nmd_users = 20;
  int day_start_hour = 7;
  int day_end_hour = 24;

  double episode_gap_mean = 3600;  // mean extra gap between usage episodes (s)
  Seconds min_separation = 120;    // minimum gap between episodes; keep above the timeout window
  double apps_per_session_mean = 3;
  double meet_probability = 0.3;   // next app session starts exactly when the previous ends
  Seconds max_intra_gap = 30;      // otherwise a gap in [1, max_intra_gap]
  DurationSpec app_duration;
  double tablet_duration_factor = 1.5;
  double user_activity_sigma = 0.3;  // lognormal spread of per-user episode rate

  double md_episode_share = 0.15;     // share of an MD user's episodes that use both devices
  double tablet_pure_share = 0.15;    // share of the remaining episodes on the tablet alone
  Seconds planted_quarter_min = 150;  // quarter length range for prototype-shaped episodes
  Seconds planted_quarter_max = 600;

  std::vector<CategorySpec> categories;
  std::vector<PlantedEffect> effects;
  std::map<unsigned, double> prototype_quotas;  // share of MD episodes planted per prototype id

  static std::vector<CategorySpec> default_categories() {
    return {{"Social Networking", 3, {"facebook", "twitter", "instagram"}},
            {"Messaging", 3, {"whatsapp", "messenger"}},
            {"Games", 2, {"puzzle_game", "racing_game", "card_game"}},
            {"Video", 2, {"youtube", "netflix"}},
            {"Productivity", 2, {"browser", "email"}},
            {"News", 1, {"news_reader"}},
            {"Photos and Gallery", 1, {"gallery"}},
            {"Weather", 1, {"weather"}}};
  }

  /// Prototype patterns need activity in every column so the planted session stays connected.
  static bool quota_feasible(unsigned id) { return id < kPrototypeCount && ((id >> 4) | (id & 15u)) == 15u; }

  void validate() const {
    if (days < 1) throw std::invalid_argument("days must be >= 1");
    if (md_users < 0 || nmd_users < 0) throw std::invalid_argument("user counts must be >= 0");
    if (day_start_hour < 0 || day_end_hour > 24 || day_start_hour >= day_end_hour)
      throw std::invalid_argument("day hours must satisfy 0 <= start < end <= 24");
    if (!(episode_gap_mean > 0)) throw std::invalid_argument("episode_gap_mean must be > 0");
    if (min_separation < 1) throw std::invalid_argument("min_separation must be >= 1");
    if (!(apps_per_session_mean >= 1)) throw std::invalid_argument("apps_per_session_mean must be >= 1");
    if (!(meet_probability >= 0 && meet_probability <= 1)) throw std::invalid_argument("meet_probability must be in [0, 1]");
    if (max_intra_gap < 1) throw std::invalid_argument("max_intra_gap must be >= 1");
    if (max_intra_gap >= min_separation) throw std::invalid_argument("max_intra_gap must be below min_separation");
    app_duration.validate("app_duration");
    if (!(tablet_duration_factor > 0)) throw std::invalid_argument("tablet_duration_factor must be > 0");
    if (!(user_activity_sigma >= 0)) throw std::invalid_argument("user_activity_sigma must be >= 0");
    for (double s : {md_episode_share, tablet_pure_share})
      if (!(s >= 0 && s <= 1)) throw std::invalid_argument("episode shares must be in [0, 1]");
    if (planted_quarter_min < 50 || planted_quarter_max < planted_quarter_min)
      throw std::invalid_argument("planted quarter range must satisfy 50 <= min <= max");
    text::parse_date(start_date);
    const auto cats = categories.empty() ? default_categories() : categories;
    for (const auto& c : cats) {
      if (c.name.empty() || c.apps.empty()) throw std::invalid_argument("category '" + c.name + "' needs a name and apps");
      if (!(c.weight > 0)) throw std::invalid_argument("category '" + c.name + "' weight must be > 0");
    }
    for (const auto& e : effects)
      if (!(e.factor > 0)) throw std::invalid_argument("planted effect factor must be > 0");
    double quota = 0;
    for (const auto& [id, q] : prototype_quotas) {
      if (!quota_feasible(id))
        throw std::invalid_argument("prototype quota for id " + std::to_string(id) + " is infeasible: every column needs activity");
      if (!(q >= 0)) throw std::invalid_argument("prototype quotas must be >= 0");
      quota += q;
    }
    if (quota > 1 + 1e-12) throw std::invalid_argument("prototype quotas sum to more than 1");
  }
};

inline DurationSpec duration_from_json(const nlohmann::json& j, DurationSpec d = {}) {
  const std::string fam = j.value("family", std::string(d.family == DurationFamily::exponential ? "exponential" : "lognormal"));
  if (fam == "exponential") d.family = DurationFamily::exponential;
  else if (fam == "lognormal") d.family = DurationFamily::lognormal;
  else throw std::invalid_argument("unknown duration family '" + fam + "'");
  d.mean = j.value("mean", d.mean);
  d.mu = j.value("mu", d.mu);
  d.sigma = j.value("sigma", d.sigma);
  d.max_seconds = j.value("max_seconds", d.max_seconds);
  return d;
}

inline PanelSpec panel_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("panel spec must be a JSON object");
  static const std::set<std::string> known = {
      "seed", "start_date", "days", "md_users", "nmd_users", "day_start_hour", "day_end_hour", "episode_gap_mean",
      "min_separation", "apps_per_session_mean", "meet_probability", "max_intra_gap", "app_duration",
      "tablet_duration_factor", "user_activity_sigma", "md_episode_share", "tablet_pure_share", "planted_quarter_min",
      "planted_quarter_max", "categories", "effects", "prototype_quotas"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown panel spec key '" + k + "'");
  PanelSpec s;
  s.seed = j.value("seed", s.seed);
  s.start_date = j.value("start_date", s.start_date);
  s.days = j.value("days", s.days);
  s.md_users = j.value("md_users", s.md_users);
  s.nmd_users = j.value("nmd_users", s.nmd_users);
  s.day_start_hour = j.value("day_start_hour", s.day_start_hour);
  s.day_end_hour = j.value("day_end_hour", s.day_end_hour);
  s.episode_gap_mean = j.value("episode_gap_mean", s.episode_gap_mean);
  s.min_separation = j.value("min_separation", s.min_separation);
  s.apps_per_session_mean = j.value("apps_per_session_mean", s.apps_per_session_mean);
  s.meet_probability = j.value("meet_probability", s.meet_probability);
  s.max_intra_gap = j.value("max_intra_gap", s.max_intra_gap);
  if (j.contains("app_duration")) s.app_duration = duration_from_json(j.at("app_duration"));
  s.tablet_duration_factor = j.value("tablet_duration_factor", s.tablet_duration_factor);
  s.user_activity_sigma = j.value("user_activity_sigma", s.user_activity_sigma);
  s.md_episode_share = j.value("md_episode_share", s.md_episode_share);
  s.tablet_pure_share = j.value("tablet_pure_share", s.tablet_pure_share);
  s.planted_quarter_min = j.value("planted_quarter_min", s.planted_quarter_min);
  s.planted_quarter_max = j.value("planted_quarter_max", s.planted_quarter_max);
  if (j.contains("categories"))
    for (const auto& c : j.at("categories"))
      s.categories.push_back({c.at("name").get<std::string>(), c.value("weight", 1.0),
                              c.at("apps").get<std::vector<std::string>>()});
  if (j.contains("effects"))
    for (const auto& e : j.at("effects")) {
      PlantedEffect p;
      const std::string pop = e.value("population", std::string("md"));
      if (pop == "md") p.population = UserGroup::md;
      else if (pop == "nmd") p.population = UserGroup::nmd;
      else if (pop == "all") p.population = UserGroup::all;
      else throw std::invalid_argument("unknown effect population '" + pop + "'");
      if (e.contains("device")) {
        p.device = parse_device_type(e.at("device").get<std::string>());
        if (!p.device) throw std::invalid_argument("unknown effect device");
      }
      if (e.contains("scope")) {
        const std::string sc = e.at("scope").get<std::string>();
        if (sc == "pure") p.scope = Purity::pure;
        else if (sc == "mixed") p.scope = Purity::mixed;
        else if (sc != "any") throw std::invalid_argument("unknown effect scope '" + sc + "'");
      }
      p.category = e.at("category").get<std::string>();
      p.factor = e.value("factor", 1.0);
      s.effects.push_back(std::move(p));
    }
  if (j.contains("prototype_quotas"))
    for (const auto& [k, v] : j.at("prototype_quotas").items()) {
      std::int64_t id = 0;
      if (!text::parse_int64(k, id) || id < 0) throw std::invalid_argument("prototype quota key '" + k + "' is not an id");
      s.prototype_quotas[static_cast<unsigned>(id)] = v.get<double>();
    }
  s.validate();
  return s;
}

/// What the generator planted, for recovery checks.
struct UserTruth {
  bool multidevice = false;
  std::array<Seconds, 2> interaction_seconds{};  // by row_of(device)
  std::int64_t first_day = 0;
  std::int64_t last_day = 0;
  double active_days() const { return static_cast<double>(last_day - first_day + 1); }
};

struct GenerationTruth {
  std::map<std::string, UserTruth> users;
  std::size_t md_episodes = 0;
  std::map<unsigned, std::size_t> planted_prototypes;
  std::size_t app_sessions = 0;
};

struct GeneratedPanel {
  std::vector<AppEvent> events;
  GenerationTruth truth;
};

namespace detail {

struct Generator {
  const PanelSpec& spec;
  std::vector<CategorySpec> cats;

  struct DeviceInfo {
    std::string id;
    DeviceType type;
    Platform platform;
  };

  std::vector<double> weights(bool md_user, DeviceType d, Purity scope) const {
    std::vector<double> w;
    for (const auto& c : cats) {
      double x = c.weight;
      for (const auto& e : spec.effects) {
        if (e.category != c.name) continue;
        if (e.population == UserGroup::md && !md_user) continue;
        if (e.population == UserGroup::nmd && md_user) continue;
        if (e.device && *e.device != d) continue;
        if (e.scope && *e.scope != scope) continue;
        x *= e.factor;
      }
      w.push_back(x);
    }
    return w;
  }

  static std::size_t pick(Rng& rng, const std::vector<double>& w) {
    double total = 0;
    for (double x : w) total += x;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (u < w[i]) return i;
      u -= w[i];
    }
    return w.size() - 1;
  }

  AppSession app(Rng& rng, const std::string& user, const DeviceInfo& dev, bool md_user, Purity scope, Instant start,
                 Seconds len) const {
    const auto& c = cats[pick(rng, weights(md_user, dev.type, scope))];
    const auto& a = c.apps[rng.below(c.apps.size())];
    return {user, dev.id, dev.type, dev.platform, a, c.name, Interval(start, start + len)};
  }

  // Random usage session; returns its end.
  Instant usage_session(Rng& rng, const std::string& user, const DeviceInfo& dev, bool md_user, Purity scope,
                        Instant start, std::vector<AppSession>& out) const {
    const std::int64_t extra = rng.geometric(1.0 / spec.apps_per_session_mean);
    const double scale = dev.type == DeviceType::tablet ? spec.tablet_duration_factor : 1.0;
    Instant t = start;
    for (std::int64_t k = 0; k <= extra; ++k) {
      if (k > 0 && !rng.bernoulli(spec.meet_probability)) t += rng.between(1, spec.max_intra_gap);
      const Seconds len = spec.app_duration.draw(rng, scale);
      out.push_back(app(rng, user, dev, md_user, scope, t, len));
      t += len;
    }
    return t;
  }

  // Tiles [a, b) with meeting app sessions.
  void tile(Rng& rng, const std::string& user, const DeviceInfo& dev, Instant a, Instant b,
            std::vector<AppSession>& out) const {
    Instant t = a;
    while (t < b) {
      const Seconds len = std::min<Seconds>(spec.app_duration.draw(rng), b - t);
      out.push_back(app(rng, user, dev, true, Purity::mixed, t, len));
      t += len;
    }
  }

  // Prototype-shaped multidevice episode; returns its end.
  Instant planted(Rng& rng, const std::string& user, const std::array<DeviceInfo, 2>& devs, unsigned id, Instant start,
                  std::vector<AppSession>& out) const {
    const Seconds q = rng.between(spec.planted_quarter_min, spec.planted_quarter_max);
    for (std::size_t r = 0; r < kMatrixRows; ++r) {
      const unsigned bits = r == 0 ? (id >> 4) : (id & 15u);
      if (bits == 0) {
        // Sparse bursts placed between the resize sample points.
        for (double at : {1.0 / 6.0, 0.5, 5.0 / 6.0}) {
          const Instant s = start + static_cast<Instant>(at * 4.0 * static_cast<double>(q));
          out.push_back(app(rng, user, devs[r], true, Purity::mixed, s, rng.between(3, 8)));
        }
        continue;
      }
      std::size_t c = 0;
      while (c < kPrototypeCols) {
        if (!((bits >> (3 - c)) & 1u)) {
          ++c;
          continue;
        }
        std::size_t e = c;
        while (e < kPrototypeCols && ((bits >> (3 - e)) & 1u)) ++e;
        tile(rng, user, devs[r], start + static_cast<Instant>(c) * q, start + static_cast<Instant>(e) * q, out);
        c = e;
      }
    }
    return start + 4 * q;
  }
};

inline void emit_events(std::span<const AppSession> device_sessions, Rng& rng, std::vector<AppEvent>& out) {
  for (std::size_t i = 0; i < device_sessions.size(); ++i) {
    const auto& s = device_sessions[i];
    out.push_back({s.user_id, s.device_id, s.device_type, s.platform, s.app_id, s.app_category, s.interval.start(),
                   EventKind::foreground, 0});
    const bool replaced = i + 1 < device_sessions.size() && device_sessions[i + 1].interval.start() == s.interval.end();
    if (replaced) continue;
    const bool last_in_run = i + 1 == device_sessions.size() || device_sessions[i + 1].interval.start() - s.interval.end() > 60;
    const EventKind k = last_in_run && rng.bernoulli(0.5) ? EventKind::screen_off : EventKind::background;
    out.push_back({s.user_id, s.device_id, s.device_type, s.platform, s.app_id, s.app_category, s.interval.end(), k, 0});
  }
}

}  // namespace detail

/// Deterministic synthetic event log. Each user draws from its own substream of the master seed.
inline GeneratedPanel generate(const PanelSpec& spec) {
  spec.validate();
  detail::Generator gen{spec, spec.categories.empty() ? PanelSpec::default_categories() : spec.categories};
  GeneratedPanel result;
  const std::int64_t first_day = text::parse_date(spec.start_date);
  const int total_users = spec.md_users + spec.nmd_users;
  const int width = std::max<int>(4, static_cast<int>(std::to_string(total_users).size()));

  double quota_total = 0;
  for (const auto& [id, q] : spec.prototype_quotas) quota_total += q;

  for (int ui = 0; ui < total_users; ++ui) {
    const bool md = ui < spec.md_users;
    std::string num = std::to_string(ui + 1);
    const std::string user = (md ? "md" : "nmd") + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    Rng rng(derive_seed(spec.seed, "user/" + user));
    const Platform platform = rng.bernoulli(0.6) ? Platform::android : Platform::ios;
    const std::array<detail::Generator::DeviceInfo, 2> devs = {
        detail::Generator::DeviceInfo{user + "-sp", DeviceType::smartphone, platform},
        detail::Generator::DeviceInfo{user + "-tab", DeviceType::tablet, platform}};
    const double activity = spec.user_activity_sigma > 0 ? rng.lognormal(0.0, spec.user_activity_sigma) : 1.0;
    const double gap_mean = spec.episode_gap_mean / activity;

    std::array<std::vector<AppSession>, 2> sessions;
    for (int d = 0; d < spec.days; ++d) {
      const Instant day0 = (first_day + d) * 86400;
      const Instant day_end = day0 + spec.day_end_hour * 3600;
      Instant t = day0 + spec.day_start_hour * 3600 + static_cast<Instant>(rng.uniform(0.0, std::min(gap_mean, 3600.0)));
      while (t < day_end) {
        Instant end = t;
        if (!md) {
          end = gen.usage_session(rng, user, devs[0], false, Purity::pure, t, sessions[0]);
        } else if (rng.bernoulli(spec.md_episode_share)) {
          ++result.truth.md_episodes;
          double u = rng.uniform();
          std::optional<unsigned> proto;
          if (u < quota_total)
            for (const auto& [id, q] : spec.prototype_quotas) {
              if (u < q) {
                proto = id;
                break;
              }
              u -= q;
            }
          if (proto) {
            ++result.truth.planted_prototypes[*proto];
            std::vector<AppSession> tmp;
            end = gen.planted(rng, user, devs, *proto, t, tmp);
            for (auto& s : tmp) sessions[row_of(s.device_type)].push_back(std::move(s));
          } else {
            const std::size_t lead = rng.below(2);
            std::vector<AppSession> first, second;
            const Instant e1 = gen.usage_session(rng, user, devs[lead], true, Purity::mixed, t, first);
            const Instant t2 = t + static_cast<Instant>(rng.below(static_cast<std::uint64_t>(e1 - t)));
            const Instant e2 = gen.usage_session(rng, user, devs[1 - lead], true, Purity::mixed, t2, second);
            end = std::max(e1, e2);
            for (auto& s : first) sessions[lead].push_back(std::move(s));
            for (auto& s : second) sessions[1 - lead].push_back(std::move(s));
          }
        } else {
          const std::size_t dev = rng.bernoulli(spec.tablet_pure_share) ? 1 : 0;
          end = gen.usage_session(rng, user, devs[dev], true, Purity::pure, t, sessions[dev]);
        }
        t = end + spec.min_separation + static_cast<Instant>(rng.exponential(gap_mean));
      }
    }

    UserTruth truth;
    truth.multidevice = md;
    bool any = false;
    for (std::size_t r = 0; r < 2; ++r) {
      auto& v = sessions[r];
      std::stable_sort(v.begin(), v.end(),
                       [](const AppSession& a, const AppSession& b) { return a.interval.start() < b.interval.start(); });
      for (const auto& s : v) {
        truth.interaction_seconds[r] += s.interval.duration();
        const std::int64_t fd = text::floor_div(s.interval.start(), 86400);
        const std::int64_t ld = text::floor_div(s.interval.end() - 1, 86400);
        truth.first_day = any ? std::min(truth.first_day, fd) : fd;
        truth.last_day = any ? std::max(truth.last_day, ld) : ld;
        any = true;
      }
      result.truth.app_sessions += v.size();
      Rng event_rng(derive_seed(spec.seed, "events/" + devs[r].id));
      detail::emit_events(v, event_rng, result.events);
    }
    result.truth.users[user] = truth;
  }
  return result;
}

}  // namespace mdsession
