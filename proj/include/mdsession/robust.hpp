#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdsession/random.hpp"
#include "mdsession/text.hpp"

namespace mdsession {

struct TrimSpec {
  double gamma = 0.2;
  std::size_t boot = 2000;
  std::uint64_t seed = 1;
  double alpha = 0.05;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 0.5)) throw std::invalid_argument("trim proportion must be in [0, 0.5)");
    if (boot < 1) throw std::invalid_argument("bootstrap replicates must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  }
};

namespace detail {

inline std::size_t trim_count(std::size_t n, double gamma) {
  if (n == 0) throw std::invalid_argument("trimmed statistics need a non-empty sample");
  if (!(gamma >= 0.0 && gamma < 0.5)) throw std::invalid_argument("trim proportion must be in [0, 0.5)");
  const auto g = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
  if (n <= 2 * g) throw std::invalid_argument("trimming removes every observation");
  return g;
}

// Sorts in place.
inline double trimmed_mean_sorting(std::span<double> xs, std::size_t g) {
  std::sort(xs.begin(), xs.end());
  double sum = 0.0;
  for (std::size_t i = g; i < xs.size() - g; ++i) sum += xs[i];
  return sum / static_cast<double>(xs.size() - 2 * g);
}

}  // namespace detail

/// Mean after dropping floor(gamma * n) observations from each end.
inline double trimmed_mean(std::span<const double> xs, double gamma) {
  const std::size_t g = detail::trim_count(xs.size(), gamma);
  std::vector<double> v(xs.begin(), xs.end());
  return detail::trimmed_mean_sorting(v, g);
}

/// Sample values clamped to the g-th smallest and g-th largest observation.
inline std::vector<double> winsorize(std::span<const double> xs, double gamma) {
  const std::size_t g = detail::trim_count(xs.size(), gamma);
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted[g], hi = sorted[sorted.size() - 1 - g];
  std::vector<double> w(xs.begin(), xs.end());
  for (double& x : w) x = std::clamp(x, lo, hi);
  return w;
}

/// Sample (n - 1) variance of the winsorized sample; 0 for a single observation.
inline double winsorized_variance(std::span<const double> xs, double gamma) {
  const auto w = winsorize(xs, gamma);
  if (w.size() < 2) return 0.0;
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double ss = 0.0;
  for (double x : w) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(w.size() - 1);
}

enum class Direction { x_greater, y_greater, equal };
enum class EffectLabel { none, small, medium, large };

inline std::string_view to_string(EffectLabel l) {
  switch (l) {
    case EffectLabel::small:
      return "small";
    case EffectLabel::medium:
      return "medium";
    case EffectLabel::large:
      return "large";
    default:
      return "none";
  }
}

inline EffectLabel effect_label(double xi) {
  if (xi > 0.50) return EffectLabel::large;
  if (xi > 0.35) return EffectLabel::medium;
  if (xi > 0.15) return EffectLabel::small;
  return EffectLabel::none;
}

inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

/// Robust explanatory-power effect size for two groups:
///
///   xi^2 = sum_j w_j (tm_j - tm_bar)^2 / winvar_pop(pooled),   w_j = n_j / N,
///
/// where tm_j are the gamma-trimmed group means, tm_bar their weighted combination, and the
/// denominator is the population (1/N) winsorized variance of the pooled sample. The ratio is
/// clamped to [0, 1] and xi is its square root.
inline double effect_size_xi(std::span<const double> x, std::span<const double> y, double gamma = 0.2) {
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const double tx = trimmed_mean(x, gamma), ty = trimmed_mean(y, gamma);
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const double n = nx + ny;
  const double total = winsorized_variance(pooled, gamma) * (n - 1.0) / n;
  if (!(total > 0.0)) throw DataError("effect size undefined: pooled winsorized variance is zero");
  const double wx = nx / n, wy = ny / n;
  const double mean = wx * tx + wy * ty;
  const double between = wx * (tx - mean) * (tx - mean) + wy * (ty - mean) * (ty - mean);
  return std::sqrt(std::clamp(between / total, 0.0, 1.0));
}

struct TestResult {
  double p_value = 1.0;
  /// Paired: trimmed mean of x - y. Two-sample: trimmed mean of x minus trimmed mean of y.
  double estimate = 0.0;
  Direction direction = Direction::equal;
  std::optional<double> effect_size;  // present iff p < alpha
  EffectLabel label = EffectLabel::none;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
};

namespace detail {

inline Direction direction_of(double estimate) {
  if (estimate > 0) return Direction::x_greater;
  if (estimate < 0) return Direction::y_greater;
  return Direction::equal;
}

// Two-sided percentile p-value: 2 * min(P(stat <= 0), P(stat > 0)). All-zero bootstrap
// distributions are the degenerate null and get p = 1.
inline double percentile_p(std::span<const double> stats) {
  std::size_t le = 0, zero = 0;
  for (double s : stats) {
    le += s <= 0.0;
    zero += s == 0.0;
  }
  if (zero == stats.size()) return 1.0;
  const double b = static_cast<double>(stats.size());
  const double p_le = static_cast<double>(le) / b;
  return std::min(1.0, 2.0 * std::min(p_le, 1.0 - p_le));
}

inline void finish(TestResult& r, std::span<const double> x, std::span<const double> y, const TrimSpec& spec) {
  r.direction = direction_of(r.estimate);
  if (r.p_value < spec.alpha) {
    try {
      const double xi = effect_size_xi(x, y, spec.gamma);
      r.effect_size = xi;
      r.label = effect_label(xi);
    } catch (const DataError&) {
      r.effect_size.reset();
    }
  }
}

}  // namespace detail

/// Percentile bootstrap on difference scores d_i = x_i - y_i with the trimmed mean as location.
inline TestResult paired_bootstrap_test(std::span<const double> x, std::span<const double> y, const TrimSpec& spec) {
  spec.validate();
  if (x.size() != y.size()) throw std::invalid_argument("paired test needs equal-length samples");
  if (x.size() < 5) throw std::invalid_argument("paired test needs at least 5 pairs");
  const std::size_t n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - y[i];

  TestResult r;
  r.n_x = r.n_y = n;
  r.estimate = trimmed_mean(d, spec.gamma);
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
    r.p_value = 1.0;
    r.direction = Direction::equal;
    return r;
  }
  const std::size_t g = detail::trim_count(n, spec.gamma);
  Rng rng(spec.seed);
  std::vector<double> stats(spec.boot), sample(n);
  for (std::size_t b = 0; b < spec.boot; ++b) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = d[rng.below(n)];
    stats[b] = detail::trimmed_mean_sorting(sample, g);
  }
  r.p_value = detail::percentile_p(stats);
  detail::finish(r, x, y, spec);
  return r;
}

/// Percentile bootstrap for the difference of trimmed means of two independent groups.
inline TestResult two_sample_bootstrap_test(std::span<const double> x, std::span<const double> y,
                                            const TrimSpec& spec) {
  spec.validate();
  if (x.size() < 5 || y.size() < 5) throw std::invalid_argument("two-sample test needs at least 5 per group");
  TestResult r;
  r.n_x = x.size();
  r.n_y = y.size();
  r.estimate = trimmed_mean(x, spec.gamma) - trimmed_mean(y, spec.gamma);
  const std::size_t gx = detail::trim_count(x.size(), spec.gamma);
  const std::size_t gy = detail::trim_count(y.size(), spec.gamma);
  Rng rng(spec.seed);
  std::vector<double> stats(spec.boot), sx(x.size()), sy(y.size());
  for (std::size_t b = 0; b < spec.boot; ++b) {
    for (auto& v : sx) v = x[rng.below(x.size())];
    for (auto& v : sy) v = y[rng.below(y.size())];
    stats[b] = detail::trimmed_mean_sorting(sx, gx) - detail::trimmed_mean_sorting(sy, gy);
  }
  r.p_value = detail::percentile_p(stats);
  detail::finish(r, x, y, spec);
  return r;
}

/// Tablet time decomposed into minutes shifted away from the smartphone and additional minutes.
struct SubstitutionSplit {
  double substitution_minutes = 0;
  double novel_minutes = 0;
  double substitution_share = 0;
  double novel_share = 0;
  bool interpretable = true;
  std::string note;
};

inline SubstitutionSplit substitution_split(double nmd_smartphone, double md_smartphone, double md_tablet) {
  SubstitutionSplit s;
  s.substitution_minutes = nmd_smartphone - md_smartphone;
  s.novel_minutes = md_tablet - s.substitution_minutes;
  if (md_tablet <= 0.0) {
    s.interpretable = false;
    s.note = "tablet minutes must be positive";
    s.substitution_share = s.novel_share = 0.0;
    return s;
  }
  s.substitution_share = s.substitution_minutes / md_tablet;
  s.novel_share = s.novel_minutes / md_tablet;
  if (s.substitution_minutes < 0) {
    s.interpretable = false;
    s.note = "negative substitution: multidevice users have more smartphone time";
  } else if (s.novel_minutes < 0) {
    s.interpretable = false;
    s.note = "negative novel usage: smartphone reduction exceeds tablet time";
  }
  return s;
}

}  // namespace mdsession
