#include <gtest/gtest.h>

#include "mdsession/descriptive.hpp"
#include "mdsession/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace mdsession;
using fixture::app;

namespace {

ConstructedPanel build(std::vector<AppSession> s, Seconds tw = 60) {
  Diagnostics d;
  return construct_panel(normalize(std::move(s), d), tw);
}

std::vector<AppSession> generated_sessions(const PanelSpec& spec) {
  const auto g = generate(spec);
  Diagnostics d;
  return normalize(pair_sessions(g.events, d), d);
}

double sum_partition(const UsageShares& s, ShareBasis b, std::initializer_list<SessionClass> classes) {
  double t = 0;
  for (auto c : classes) t += s.get(b, c);
  return t;
}

}  // namespace

TEST(Summarize, LengthAppsAndInteraction) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 10, 30),
                        app("u", DeviceType::smartphone, 50, 80)});
  const auto recs = records_of(p, SessionClass::smartphone_all);
  const auto s = summarize(recs);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->sessions, 1u);
  EXPECT_DOUBLE_EQ(s->length_seconds.mean, 80);
  EXPECT_DOUBLE_EQ(s->app_sessions.mean, 3);
  EXPECT_EQ(s->interaction_seconds, 60);
}

TEST(Summarize, MultideviceAppSessionsAdd) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 10), app("u", DeviceType::smartphone, 10, 20),
                        app("u", DeviceType::tablet, 5, 8), app("u", DeviceType::tablet, 8, 12), app("u", DeviceType::tablet, 12, 15)});
  const auto recs = records_of(p, SessionClass::multidevice);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(summarize(recs)->app_sessions.mean, 5);
  EXPECT_EQ(recs[0].interaction_seconds, 20 + 10);
}

TEST(Summarize, EmptyClassIsMarked) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 10)});
  EXPECT_FALSE(summarize(records_of(p, SessionClass::tablet_all)).has_value());
}

TEST(Moments, MedianAveragesMiddlePair) {
  EXPECT_DOUBLE_EQ(moments({4, 1, 3, 2})->median, 2.5);
  EXPECT_DOUBLE_EQ(moments({7})->sd, 0);
  EXPECT_NEAR(moments({1, 2, 3, 4})->sd, std::sqrt(5.0 / 3.0), 1e-12);
}

TEST(UsageShares, NoMultideviceMeansZeroShare) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 10), app("v", DeviceType::tablet, 0, 10)});
  const auto s = usage_shares(p);
  for (auto b : kShareBases) EXPECT_EQ(s.get(b, SessionClass::multidevice), 0.0);
}

TEST(UsageShares, PureEqualTimeSplitsEvenly) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 100), app("u", DeviceType::tablet, 1000, 1100)});
  const auto s = usage_shares(p);
  EXPECT_DOUBLE_EQ(s.get(ShareBasis::interaction_time, SessionClass::smartphone_pure), 50);
  EXPECT_DOUBLE_EQ(s.get(ShareBasis::interaction_time, SessionClass::tablet_pure), 50);
}

TEST(UsageShares, PartitionsSumToHundredOnGeneratedPanels) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PanelSpec spec;
    spec.seed = seed;
    spec.days = 5;
    spec.md_users = 4;
    spec.nmd_users = 2;
    const auto p = construct_panel(generated_sessions(spec), 60);
    const auto s = usage_shares(p);
    for (auto b : kShareBases) {
      EXPECT_NEAR(sum_partition(s, b, {SessionClass::smartphone_all, SessionClass::tablet_all}), 100, 0.2);
      EXPECT_NEAR(sum_partition(s, b, {SessionClass::smartphone_pure, SessionClass::tablet_pure, SessionClass::multidevice}), 100, 0.2);
    }
  }
}

TEST(PerUser, DiffersFromDatasetLevel) {
  // u has one 100 s session, v has three 10 s sessions; per-user median of medians is 55,
  // while the session-level median is 10.
  const long day = 86400;
  const auto p = build({app("u", DeviceType::smartphone, 0, 100), app("v", DeviceType::smartphone, 0, 10),
                        app("v", DeviceType::smartphone, 1000, 1010), app("v", DeviceType::smartphone, day + 5, day + 15)});
  const auto idx = index_users(p);
  const auto pu = per_user_summary(p, SessionClass::smartphone_all, idx);
  const auto ds = summarize(records_of(p, SessionClass::smartphone_all));
  EXPECT_DOUBLE_EQ(pu.median_length_seconds->median, 55);
  EXPECT_DOUBLE_EQ(ds->length_seconds.median, 10);
  // v is active on two days: 3 sessions / 2 days; u: 1 / 1.
  EXPECT_DOUBLE_EQ(pu.sessions_per_day->mean, (1.0 + 1.5) / 2);
}

TEST(PerUser, SingleUserEqualsDatasetLevel) {
  const auto p = build({app("u", DeviceType::smartphone, 0, 30), app("u", DeviceType::smartphone, 500, 540),
                        app("u", DeviceType::smartphone, 900, 910)});
  const auto pu = per_user_summary(p, SessionClass::smartphone_all, index_users(p));
  const auto ds = summarize(records_of(p, SessionClass::smartphone_all));
  EXPECT_DOUBLE_EQ(pu.median_length_seconds->mean, ds->length_seconds.median);
  EXPECT_DOUBLE_EQ(pu.median_app_sessions->mean, ds->app_sessions.median);
}

TEST(Hourly, SingleHourAndProportionalSplit) {
  const long h21 = 21 * 3600;
  auto p = build({app("u", DeviceType::smartphone, h21 + 60, h21 + 600)});
  auto idx = index_users(p);
  auto h = hourly_distribution(records_of(p, SessionClass::smartphone_all), idx);
  EXPECT_DOUBLE_EQ(h.percent[21], 100);

  p = build({app("u", DeviceType::smartphone, h21 + 1800, h21 + 5400)});
  idx = index_users(p);
  h = hourly_distribution(records_of(p, SessionClass::smartphone_all), idx);
  EXPECT_DOUBLE_EQ(h.percent[21], 50);
  EXPECT_DOUBLE_EQ(h.percent[22], 50);
}

TEST(Hourly, OffsetsShiftBins) {
  const auto p = build({app("u", DeviceType::smartphone, 3600, 3700)});
  const auto idx = index_users(p, {{"u", 2 * 3600}});
  EXPECT_DOUBLE_EQ(hourly_distribution(records_of(p, SessionClass::smartphone_all), idx).percent[3], 100);
}

TEST(Hourly, ConservesInteractionTime) {
  PanelSpec spec;
  spec.days = 3;
  spec.md_users = 3;
  spec.nmd_users = 1;
  const auto p = construct_panel(generated_sessions(spec), 60);
  const auto idx = index_users(p);
  for (auto c : kSessionClasses) {
    const auto recs = records_of(p, c);
    Seconds total = 0;
    for (const auto& r : recs) total += r.interaction_seconds;
    const auto h = hourly_distribution(recs, idx);
    EXPECT_EQ(h.total, total);
    double pct = 0;
    for (double v : h.percent) pct += v;
    if (total > 0) {
      EXPECT_NEAR(pct, 100, 0.1);
    }
  }
}

TEST(Ecdf, BasicCases) {
  const auto one = empirical_cdf({5});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].value, 5);
  EXPECT_EQ(one[0].cumulative, 1.0);
  const auto four = empirical_cdf({3, 1, 4, 2});
  EXPECT_EQ(cdf_quantile(four, 0.5), 2);
  EXPECT_THROW(empirical_cdf({}), DataError);
}

TEST(Ecdf, ExponentialSampleMatchesAnalyticCdf) {
  Rng rng(17);
  std::vector<double> v;
  for (int i = 0; i < 1000; ++i) v.push_back(rng.exponential(30.0));
  const auto cdf = empirical_cdf(v);
  double ks = 0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    const double f = 1 - std::exp(-cdf[i].value / 30.0);
    const double before = i == 0 ? 0.0 : cdf[i - 1].cumulative;
    ks = std::max({ks, std::abs(cdf[i].cumulative - f), std::abs(before - f)});
    EXPECT_DOUBLE_EQ(cdf[i].cumulative, oracle::ecdf_at(v, cdf[i].value));
  }
  EXPECT_LT(ks, 0.05);
}

TEST(Sweep, SinglePointEqualsDefaultRun) {
  PanelSpec spec;
  spec.days = 3;
  spec.md_users = 3;
  spec.nmd_users = 2;
  const auto s = generated_sessions(spec);
  const std::vector<Seconds> grid = {60};
  const auto sw = timeout_sweep(s, grid);
  ASSERT_EQ(sw.size(), 1u);
  const auto direct = sweep_point(construct_panel(s, 60));
  EXPECT_EQ(sw[0].sessions_per_user, direct.sessions_per_user);
  EXPECT_EQ(sw[0].app_sessions_per_session, direct.app_sessions_per_session);
}

TEST(Sweep, SingleDeviceCountsShrinkAsWindowGrows) {
  PanelSpec spec;
  spec.days = 3;
  spec.md_users = 4;
  spec.nmd_users = 2;
  spec.max_intra_gap = 100;
  spec.min_separation = 200;
  const auto s = generated_sessions(spec);
  const std::vector<Seconds> grid = {0, 1, 10, 60, 300, 1000, 10000};
  const auto sw = timeout_sweep(s, grid);
  for (std::size_t i = 1; i < sw.size(); ++i) {
    EXPECT_LE(sw[i].usage_sessions, sw[i - 1].usage_sessions);
    for (auto c : {SessionClass::smartphone_all, SessionClass::tablet_all})
      EXPECT_GE(sw[i].app_sessions_per_session[static_cast<std::size_t>(c)],
                sw[i - 1].app_sessions_per_session[static_cast<std::size_t>(c)] - 1e-12);
  }
}

TEST(CategoryShares, SingleCategoryAndSums) {
  auto one = category_share_report(std::vector<AppSession>{app("u", DeviceType::smartphone, 0, 10, "a", "Games")});
  ASSERT_EQ(one.categories[0].size(), 1u);
  EXPECT_DOUBLE_EQ(one.categories[0][0].percent, 100);

  PanelSpec spec;
  spec.days = 4;
  spec.md_users = 3;
  spec.nmd_users = 3;
  const auto rep = category_share_report(generated_sessions(spec));
  for (std::size_t d = 0; d < 2; ++d) {
    double c = 0, a = 0;
    for (const auto& r : rep.categories[d]) c += r.percent;
    for (const auto& r : rep.apps[d]) a += r.percent;
    EXPECT_NEAR(c, 100, 0.1);
    EXPECT_NEAR(a, 100, 0.1);
  }
}

TEST(CategoryShares, PlantedTwoToOneRatioRecovered) {
  PanelSpec spec;
  spec.days = 10;
  spec.md_users = 0;
  spec.nmd_users = 20;
  spec.categories = {{"Games", 2, {"g"}}, {"Video", 1, {"v"}}};
  const auto rep = category_share_report(generated_sessions(spec));
  double games = 0, video = 0;
  for (const auto& r : rep.categories[0]) (r.name == "Games" ? games : video) = r.percent;
  EXPECT_NEAR(games / video, 2.0, 0.2);
}

TEST(Descriptive, GeneratorMeanAndMedianRecovered) {
  PanelSpec spec;
  spec.days = 20;
  spec.md_users = 0;
  spec.nmd_users = 60;
  spec.apps_per_session_mean = 1;
  spec.app_duration.family = DurationFamily::exponential;
  spec.app_duration.mean = 80;
  const auto p = construct_panel(generated_sessions(spec), 60);
  const auto s = summarize(records_of(p, SessionClass::smartphone_all));
  // Durations are rounded up to whole seconds: mean + ~0.5, median ln2 * mean + ~0.5.
  EXPECT_NEAR(s->length_seconds.mean, 80.5, 0.05 * 80.5);
  EXPECT_NEAR(s->length_seconds.median, 80 * std::log(2.0) + 0.5, 0.05 * 80 * std::log(2.0));
  EXPECT_DOUBLE_EQ(s->app_sessions.mean, 1.0);
}
