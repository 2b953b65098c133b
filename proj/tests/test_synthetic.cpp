#include <gtest/gtest.h>

#include <sstream>

#include "mdsession/battery.hpp"
#include "mdsession/synthetic.hpp"

using namespace mdsession;

namespace {

std::string dump(const GeneratedPanel& g) {
  std::ostringstream os;
  write_events_jsonl(os, g.events);
  return os.str();
}

PanelSpec small(std::uint64_t seed = 1) {
  PanelSpec s;
  s.seed = seed;
  s.days = 7;
  s.md_users = 6;
  s.nmd_users = 4;
  return s;
}

}  // namespace

TEST(Generator, ByteDeterministic) {
  EXPECT_EQ(dump(generate(small(5))), dump(generate(small(5))));
  EXPECT_NE(dump(generate(small(5))), dump(generate(small(6))));
}

TEST(Generator, UserStreamsIndependentOfPanelSize) {
  auto a = small(2);
  auto b = small(2);
  b.nmd_users = 9;
  const auto ga = generate(a), gb = generate(b);
  // md0001 depends only on the seed and its own id.
  auto pick = [](const GeneratedPanel& g) {
    std::vector<AppEvent> v;
    for (const auto& e : g.events)
      if (e.user_id == "md0001") v.push_back(e);
    std::ostringstream os;
    write_events_jsonl(os, v);
    return os.str();
  };
  EXPECT_EQ(pick(ga), pick(gb));
}

TEST(Generator, SmartphoneOnlyUsersHaveNoTablet) {
  const auto g = generate(small(3));
  for (const auto& e : g.events) {
    if (e.user_id.rfind("nmd", 0) == 0) {
      EXPECT_EQ(e.device_type, DeviceType::smartphone);
    }
  }
}

TEST(Generator, IngestsWithoutDiagnostics) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto spec = small(seed);
    spec.prototype_quotas = {{15, 0.2}, {135, 0.2}};
    const auto g = generate(spec);
    Diagnostics d;
    const auto s = normalize(pair_sessions(g.events, d), d);
    EXPECT_TRUE(d.empty()) << d.items().front().message;
    EXPECT_EQ(s.size(), g.truth.app_sessions);
  }
}

TEST(Generator, InteractionTimeRecovered) {
  PanelSpec spec;
  spec.days = 10;
  spec.md_users = 50;
  spec.nmd_users = 50;
  const auto g = generate(spec);
  Diagnostics d;
  const auto p = construct_panel(normalize(pair_sessions(g.events, d), d), 60);
  const auto idx = index_users(p);
  std::vector<double> md_sp, md_tab, nmd_sp;
  for (const auto& [user, t] : g.truth.users) {
    const double days = t.active_days();
    EXPECT_EQ(idx.at(user).active_days(), days);
    if (t.multidevice) {
      md_sp.push_back(t.interaction_seconds[0] / 60.0 / days);
      md_tab.push_back(t.interaction_seconds[1] / 60.0 / days);
    } else {
      nmd_sp.push_back(t.interaction_seconds[0] / 60.0 / days);
    }
  }
  const auto m = daily_usage_means(p, idx, 0.2);
  EXPECT_NEAR(m.md_smartphone, trimmed_mean(md_sp, 0.2), 0.05 * m.md_smartphone);
  EXPECT_NEAR(m.md_tablet, trimmed_mean(md_tab, 0.2), 0.05 * m.md_tablet);
  EXPECT_NEAR(m.nmd_smartphone, trimmed_mean(nmd_sp, 0.2), 0.05 * m.nmd_smartphone);
}

TEST(Generator, QuotaRecoveredByAssignment) {
  PanelSpec spec;
  spec.seed = 4;
  spec.days = 20;
  spec.md_users = 20;
  spec.nmd_users = 0;
  spec.prototype_quotas = {{15, 0.3}};
  const auto g = generate(spec);
  Diagnostics d;
  const auto p = construct_panel(normalize(pair_sessions(g.events, d), d), 60);
  ASSERT_GE(p.md_sessions.size(), 500u);
  std::size_t hits = 0;
  for (const auto& a : assign_groups(p)) hits += a.group == 15;
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(p.md_sessions.size()), 0.28);
}

TEST(Generator, PlantedSessionsMatchTheirPrototype) {
  for (unsigned id : {15u, 240u, 135u, 165u, 60u, 255u}) {
    PanelSpec spec;
    spec.seed = id;
    spec.days = 3;
    spec.md_users = 3;
    spec.nmd_users = 0;
    spec.md_episode_share = 1.0;
    spec.prototype_quotas = {{id, 1.0}};
    const auto g = generate(spec);
    Diagnostics d;
    const auto p = construct_panel(normalize(pair_sessions(g.events, d), d), 60);
    ASSERT_EQ(p.md_sessions.size(), g.truth.md_episodes) << id;
    for (auto mode : {ResizeMode::stretch_shorter, ResizeMode::downsample_session})
      for (const auto& a : assign_groups(p, mode)) EXPECT_EQ(a.group, id) << "id " << id;
  }
}

TEST(Generator, InfeasibleQuotasRejected) {
  for (unsigned id : {0u, 128u, 8u, 256u}) {
    auto spec = small();
    spec.prototype_quotas = {{id, 0.1}};
    EXPECT_THROW(generate(spec), std::invalid_argument) << id;
  }
  auto spec = small();
  spec.prototype_quotas = {{15, 0.6}, {240, 0.6}};
  EXPECT_THROW(generate(spec), std::invalid_argument);
  spec = small();
  spec.max_intra_gap = spec.min_separation;
  EXPECT_THROW(generate(spec), std::invalid_argument);
}

TEST(Generator, SpecFromJson) {
  const auto j = nlohmann::json::parse(R"({"seed": 9, "days": 3, "md_users": 2, "nmd_users": 1,
    "prototype_quotas": {"135": 0.5}, "app_duration": {"family": "exponential", "mean": 40}})");
  const auto s = panel_spec_from_json(j);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.prototype_quotas.at(135), 0.5);
  EXPECT_EQ(s.app_duration.family, DurationFamily::exponential);
  EXPECT_THROW(panel_spec_from_json(nlohmann::json::parse(R"({"dayz": 3})")), std::invalid_argument);
}
