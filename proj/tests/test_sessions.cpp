#include <gtest/gtest.h>

#include "mdsession/sessions.hpp"
#include "mdsession/random.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mdsession;

namespace {

std::vector<std::string> apps_of(const UsageSession& u) {
  std::vector<std::string> out;
  for (const auto& a : u.app_sessions) out.push_back(a.app_id);
  return out;
}

ConstructedPanel build(std::vector<AppSession> s, Seconds tw) {
  Diagnostics d;
  return construct_panel(normalize(std::move(s), d), tw);
}

}  // namespace

TEST(TwoDeviceExample, UsageAndMultideviceSessions) {
  const auto panel = build(fixture::two_device_example(), 60);
  ASSERT_EQ(panel.usage_sessions.size(), 4u);
  std::vector<std::vector<std::string>> got;
  for (const auto& u : panel.usage_sessions) got.push_back(apps_of(u));
  const std::vector<std::vector<std::string>> want = {{"A", "B", "C"}, {"D"}, {"E", "F"}, {"G"}};
  EXPECT_EQ(got, want);

  ASSERT_EQ(panel.md_sessions.size(), 2u);
  auto member_apps = [&](const MultideviceSession& md) {
    std::set<std::string> s;
    for (auto* u : panel.members(md)) s.insert(apps_of(*u).front());
    return s;
  };
  EXPECT_EQ(member_apps(panel.md_sessions[0]), (std::set<std::string>{"A", "E"}));  // L = {H, J}
  EXPECT_EQ(member_apps(panel.md_sessions[1]), (std::set<std::string>{"D", "G"}));  // M = {I, K}
  for (const auto& u : panel.usage_sessions) EXPECT_EQ(u.purity, Purity::mixed);
  EXPECT_EQ(panel.md_sessions[0].interval, Interval(0, 600));
  EXPECT_EQ(panel.md_sessions[0].app_session_count, 5u);
  EXPECT_EQ(panel.md_sessions[0].interaction_seconds, 100 + 100 + 70 + 250 + 180);
}

TEST(UsageSessions, GapBoundaryInclusive) {
  using fixture::app;
  auto s = build({app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 70, 80),
                  app("u", DeviceType::smartphone, 141, 150)},
                 60);
  ASSERT_EQ(s.usage_sessions.size(), 2u);
  EXPECT_EQ(s.usage_sessions[0].app_sessions.size(), 2u);
}

TEST(UsageSessions, ZeroWindowKeepsOnlyMeetingRuns) {
  using fixture::app;
  auto s = build({app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 10, 20),
                  app("u", DeviceType::smartphone, 21, 30)},
                 0);
  EXPECT_EQ(s.usage_sessions.size(), 2u);
}

TEST(UsageSessions, RejectsUnsortedInput) {
  using fixture::app;
  std::vector<AppSession> s = {app("u", DeviceType::smartphone, 50, 60), app("u", DeviceType::smartphone, 0, 10)};
  EXPECT_THROW(build_usage_sessions(s, 60), std::invalid_argument);
}

TEST(Multidevice, SingleDeviceUserHasNoMultideviceSessions) {
  using fixture::app;
  auto p = build({app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 500, 510)}, 60);
  EXPECT_TRUE(p.md_sessions.empty());
  for (const auto& u : p.usage_sessions) EXPECT_EQ(u.purity, Purity::pure);
}

TEST(Multidevice, ChainThroughPrecedesWithinWindow) {
  using fixture::app;
  // phone [0,10] -> tablet [50,60] -> phone [100,110]: all one component at tw = 60, none at tw = 30.
  std::vector<AppSession> s = {app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 100, 110),
                               app("u", DeviceType::tablet, 50, 60)};
  EXPECT_EQ(build(s, 60).md_sessions.size(), 1u);
  EXPECT_EQ(build(s, 60).md_sessions[0].members.size(), 3u);  // the phone gap of 90 s keeps two phone sessions
  EXPECT_TRUE(build(s, 30).md_sessions.empty());
}

TEST(Multidevice, MatchesComponentOracleOnRandomPanels) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    std::vector<AppSession> s;
    for (auto type : {DeviceType::smartphone, DeviceType::tablet}) {
      long t = rng.between(0, 200);
      for (int k = 0; k < 30; ++k) {
        const long len = rng.between(1, 60);
        s.push_back(fixture::app("u", type, t, t + len));
        t += len + rng.between(0, 150);
      }
    }
    const Seconds tw = rng.between(0, 90);
    const auto panel = build(s, tw);
    std::set<std::set<oracle::Key>> got;
    for (const auto& md : panel.md_sessions) {
      std::set<oracle::Key> c;
      for (auto* u : panel.members(md)) c.insert({u->device_id, u->interval.start()});
      got.insert(c);
    }
    ASSERT_EQ(got, oracle::md_components(panel.usage_sessions, tw)) << "seed " << seed;
    for (const auto& u : panel.usage_sessions) EXPECT_EQ(u.purity == Purity::mixed, u.md_session.has_value());
  }
}

TEST(ConstructionStats, SharesSumToHundred) {
  const auto panel = build(fixture::two_device_example(), 60);
  const auto st = construction_stats(panel);
  EXPECT_EQ(st.smartphone.app_sessions, 4u);
  EXPECT_EQ(st.smartphone.usage_sessions, 2u);
  EXPECT_EQ(st.multidevice.md_sessions, 2u);
  EXPECT_EQ(st.multidevice.usage_sessions, 4u);
  // A meets B, B precedes C within tw: counted from both sides.
  EXPECT_EQ(st.smartphone.shares.count(RelationLabel::meets), 1u);
  EXPECT_EQ(st.smartphone.shares.count(RelationLabel::precededByWithinTW), 1u);
  for (const auto* c : {&st.smartphone, &st.tablet, &st.multidevice}) {
    double sum = 0;
    for (std::size_t r = 0; r < kRelationLabelCount; ++r) sum += c->shares.percent(static_cast<RelationLabel>(r));
    EXPECT_NEAR(sum, 100.0, 1e-9);
  }
  // H [0,300] overlaps J [150,600]; I [1000,1100] overlaps K [1050,1200].
  EXPECT_EQ(st.multidevice.shares.count(RelationLabel::overlaps), 2u);
}

TEST(ConstructionStats, EmptyPanel) {
  const auto panel = construct_panel(std::vector<AppSession>{}, 60);
  EXPECT_TRUE(panel.usage_sessions.empty());
  const auto st = construction_stats(panel);
  EXPECT_EQ(st.multidevice.shares.total(), 0u);
  EXPECT_EQ(st.multidevice.shares.percent(RelationLabel::meets), 0.0);
}
