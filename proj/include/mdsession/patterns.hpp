#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdsession/sessions.hpp"
#include "mdsession/text.hpp"

namespace mdsession {

/// Row 0 is always the smartphone, row 1 the tablet.
inline constexpr std::size_t kMatrixRows = 2;
inline constexpr std::size_t kPrototypeCols = 4;
inline constexpr std::size_t kPrototypeCount = 256;

inline constexpr std::size_t row_of(DeviceType t) { return t == DeviceType::smartphone ? 0 : 1; }

/// How an app session [start, end] maps onto one-second columns.
/// half_open: seconds start..end-1 are active. closed: seconds start..end are active.
enum class Coverage { half_open, closed };

template <typename T>
class Matrix2 {
 public:
  Matrix2() = default;
  explicit Matrix2(std::size_t cols) : cols_(cols), data_(kMatrixRows * cols, T{}) {
    if (cols == 0) throw std::invalid_argument("matrix needs at least one column");
  }
  Matrix2(std::initializer_list<T> row0, std::initializer_list<T> row1) : Matrix2(row0.size()) {
    if (row1.size() != row0.size()) throw std::invalid_argument("matrix rows must have equal length");
    std::copy(row0.begin(), row0.end(), data_.begin());
    std::copy(row1.begin(), row1.end(), data_.begin() + static_cast<std::ptrdiff_t>(cols_));
  }

  std::size_t rows() const { return kMatrixRows; }
  std::size_t cols() const { return cols_; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const Matrix2&, const Matrix2&) = default;

 private:
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Binary per-second activity of a multidevice session.
using ActivityMatrix = Matrix2<std::uint8_t>;
/// Real-valued result of interpolation resizing; entries stay in [0, 1].
using ResizedMatrix = Matrix2<double>;

/// Builds the activity matrix of `app_sessions` over `hull`.
inline ActivityMatrix to_matrix(std::span<const AppSession* const> app_sessions, const Interval& hull,
                                Coverage coverage = Coverage::half_open) {
  const Instant first = hull.start();
  const std::size_t cols = static_cast<std::size_t>(hull.duration()) + (coverage == Coverage::closed ? 1 : 0);
  ActivityMatrix m(cols);
  for (const AppSession* a : app_sessions) {
    if (a->interval.start() < hull.start() || a->interval.end() > hull.end())
      throw std::invalid_argument("app session lies outside the matrix hull");
    const std::size_t r = row_of(a->device_type);
    const auto lo = static_cast<std::size_t>(a->interval.start() - first);
    const auto hi = static_cast<std::size_t>(a->interval.end() - first) + (coverage == Coverage::closed ? 1 : 0);
    std::fill(m.row(r).begin() + static_cast<std::ptrdiff_t>(lo), m.row(r).begin() + static_cast<std::ptrdiff_t>(hi),
              std::uint8_t{1});
  }
  return m;
}

inline ActivityMatrix to_matrix(const MultideviceSession& md, const ConstructedPanel& panel,
                                Coverage coverage = Coverage::half_open) {
  std::vector<const AppSession*> apps;
  for (const UsageSession* u : panel.members(md))
    for (const auto& a : u->app_sessions) apps.push_back(&a);
  return to_matrix(apps, md.interval, coverage);
}

namespace detail {

// Position of target column k on the source index axis, split into integer part and fraction.
// Samples sit at normalised positions j/(n-1); a single target column samples the midpoint.
struct SamplePoint {
  std::size_t index;
  double frac;
};

inline SamplePoint sample_point(std::size_t k, std::size_t source_cols, std::size_t target_cols) {
  if (source_cols == 1) return {0, 0.0};
  if (target_cols == 1) {
    const std::size_t span = source_cols - 1;
    return {span / 2, (span % 2) ? 0.5 : 0.0};
  }
  const std::size_t num = k * (source_cols - 1);
  const std::size_t den = target_cols - 1;
  return {num / den, static_cast<double>(num % den) / static_cast<double>(den)};
}

template <typename Row>
double interpolate(const Row& row, SamplePoint p) {
  const double lo = static_cast<double>(row[p.index]);
  if (p.frac == 0.0) return lo;
  const double hi = static_cast<double>(row[p.index + 1]);
  return lo + (hi - lo) * p.frac;
}

}  // namespace detail

/// Resamples each row independently to `target_cols` by linear interpolation. Resizing to the
/// same length is the identity and a single-column row broadcasts its value.
template <typename T>
ResizedMatrix resize(const Matrix2<T>& m, std::size_t target_cols) {
  if (target_cols == 0) throw std::invalid_argument("resize target must be at least one column");
  ResizedMatrix out(target_cols);
  for (std::size_t k = 0; k < target_cols; ++k) {
    const auto p = detail::sample_point(k, m.cols(), target_cols);
    for (std::size_t r = 0; r < kMatrixRows; ++r) out.at(r, k) = detail::interpolate(m.row(r), p);
  }
  return out;
}

/// Frobenius norm of the element-wise difference. Dimensions must match.
template <typename A, typename B>
double distance(const Matrix2<A>& a, const Matrix2<B>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("distance requires equal matrix dimensions");
  double sum = 0.0;
  for (std::size_t r = 0; r < kMatrixRows; ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double d = static_cast<double>(a.at(r, c)) - static_cast<double>(b.at(r, c));
      sum += d * d;
    }
  return std::sqrt(sum);
}

/// IBSM comparison: the shorter matrix is resized to the longer one before taking the distance.
template <typename A, typename B>
double ibsm_distance(const Matrix2<A>& a, const Matrix2<B>& b) {
  if (a.cols() == b.cols()) return distance(a, b);
  if (a.cols() < b.cols()) return distance(resize(a, b.cols()), b);
  return distance(a, resize(b, a.cols()));
}

/// Prototype id = the 8-bit number formed by row 0 followed by row 1, most significant bit first.
inline ActivityMatrix prototype_matrix(unsigned id) {
  if (id >= kPrototypeCount) throw std::out_of_range("prototype id must be in 0..255");
  ActivityMatrix m(kPrototypeCols);
  for (std::size_t c = 0; c < kPrototypeCols; ++c) {
    m.at(0, c) = (id >> (7 - c)) & 1u;
    m.at(1, c) = (id >> (3 - c)) & 1u;
  }
  return m;
}

inline unsigned prototype_id(const ActivityMatrix& m) {
  if (m.cols() != kPrototypeCols) throw std::invalid_argument("prototype matrices are 2x4");
  unsigned id = 0;
  for (std::size_t r = 0; r < kMatrixRows; ++r)
    for (std::size_t c = 0; c < kPrototypeCols; ++c) {
      if (m.at(r, c) > 1) throw std::invalid_argument("prototype matrices are binary");
      id = (id << 1) | m.at(r, c);
    }
  return id;
}

inline std::string prototype_bits(unsigned id) {
  std::string s(8, '0');
  for (int b = 0; b < 8; ++b)
    if ((id >> (7 - b)) & 1u) s[static_cast<std::size_t>(b)] = '1';
  return s;
}

/// How a session matrix and a 2x4 prototype are brought to equal length.
/// stretch_shorter resizes whichever is shorter (normally the prototype, up to the session
/// length); downsample_session always resizes the session to four columns.
enum class ResizeMode { stretch_shorter, downsample_session };

/// Nearest prototype under the Frobenius distance; ties go to the lowest id.
template <typename T>
unsigned assign_group(const Matrix2<T>& m, ResizeMode mode = ResizeMode::stretch_shorter) {
  // Squared distance separates by row, so the 256 totals are sums of two 16-entry row tables.
  std::array<std::array<double, 16>, kMatrixRows> row_cost{};
  if (mode == ResizeMode::downsample_session || m.cols() <= kPrototypeCols) {
    const ResizedMatrix r = resize(m, kPrototypeCols);
    for (std::size_t row = 0; row < kMatrixRows; ++row)
      for (unsigned p = 0; p < 16; ++p) {
        double s = 0.0;
        for (std::size_t c = 0; c < kPrototypeCols; ++c) {
          const double d = r.at(row, c) - static_cast<double>((p >> (3 - c)) & 1u);
          s += d * d;
        }
        row_cost[row][p] = s;
      }
  } else {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto sp = detail::sample_point(c, kPrototypeCols, m.cols());
      for (unsigned p = 0; p < 16; ++p) {
        const std::array<double, 4> bits = {double((p >> 3) & 1u), double((p >> 2) & 1u), double((p >> 1) & 1u),
                                            double(p & 1u)};
        const double v = detail::interpolate(bits, sp);
        for (std::size_t row = 0; row < kMatrixRows; ++row) {
          const double d = static_cast<double>(m.at(row, c)) - v;
          row_cost[row][p] += d * d;
        }
      }
    }
  }
  unsigned best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (unsigned id = 0; id < kPrototypeCount; ++id) {
    const double cost = row_cost[0][id >> 4] + row_cost[1][id & 15u];
    if (cost < best_cost) {
      best_cost = cost;
      best = id;
    }
  }
  return best;
}

struct GroupAssignment {
  std::size_t md_session;
  std::string user_id;
  unsigned group;
};

inline std::vector<GroupAssignment> assign_groups(const ConstructedPanel& panel,
                                                  ResizeMode mode = ResizeMode::stretch_shorter,
                                                  Coverage coverage = Coverage::half_open) {
  std::vector<GroupAssignment> out;
  out.reserve(panel.md_sessions.size());
  for (const auto& md : panel.md_sessions)
    out.push_back({md.id, md.user_id, assign_group(to_matrix(md, panel, coverage), mode)});
  return out;
}

/// Group shares in percent: over all sessions, and as the unweighted mean of per-user shares.
struct GroupReport {
  std::array<double, kPrototypeCount> overall{};
  std::array<double, kPrototypeCount> per_user_mean{};
  std::size_t sessions = 0;
  std::size_t users = 0;

  /// Ids ordered by descending share (ties by id).
  std::vector<unsigned> ranking(bool per_user) const {
    std::vector<unsigned> ids(kPrototypeCount);
    for (unsigned i = 0; i < kPrototypeCount; ++i) ids[i] = i;
    const auto& v = per_user ? per_user_mean : overall;
    std::stable_sort(ids.begin(), ids.end(), [&](unsigned a, unsigned b) { return v[a] > v[b]; });
    return ids;
  }
};

inline GroupReport group_frequencies(std::span<const GroupAssignment> assignments) {
  if (assignments.empty()) throw DataError("group frequencies need at least one multidevice session");
  GroupReport rep;
  std::map<std::string, std::array<std::size_t, kPrototypeCount>> per_user;
  std::array<std::size_t, kPrototypeCount> counts{};
  for (const auto& a : assignments) {
    ++counts[a.group];
    ++per_user[a.user_id][a.group];
  }
  rep.sessions = assignments.size();
  rep.users = per_user.size();
  for (std::size_t g = 0; g < kPrototypeCount; ++g)
    rep.overall[g] = 100.0 * static_cast<double>(counts[g]) / static_cast<double>(rep.sessions);
  for (const auto& [user, c] : per_user) {
    std::size_t n = 0;
    for (auto x : c) n += x;
    for (std::size_t g = 0; g < kPrototypeCount; ++g)
      rep.per_user_mean[g] += 100.0 * static_cast<double>(c[g]) / static_cast<double>(n);
  }
  for (auto& v : rep.per_user_mean) v /= static_cast<double>(rep.users);
  return rep;
}

struct CategoryContrast {
  DeviceType device;
  std::string category;
  double share_group;       // category time / device time, in-group sessions
  double share_complement;  // same over the complement
  /// (g - c) / max(g, c): bounded in [-1, 1].
  double relative_difference;
  /// (g - c) / min(g, c): "x times more/less" reading; absent when the smaller share is zero.
  std::optional<double> fold_difference;
};

/// Compares per-device category mixes of sessions in `group` against all other sessions.
inline std::vector<CategoryContrast> category_contrast(const ConstructedPanel& panel,
                                                       std::span<const GroupAssignment> assignments, unsigned group) {
  struct Tally {
    std::map<std::string, double> by_category;
    double total = 0;
  };
  std::array<Tally, 2> in{}, out{};
  std::size_t n_in = 0, n_out = 0;
  for (const auto& a : assignments) {
    const bool member = a.group == group;
    (member ? n_in : n_out) += 1;
    auto& tallies = member ? in : out;
    for (const UsageSession* u : panel.members(panel.md_sessions.at(a.md_session)))
      for (const auto& s : u->app_sessions) {
        auto& t = tallies[row_of(s.device_type)];
        t.by_category[s.app_category] += static_cast<double>(s.interval.duration());
        t.total += static_cast<double>(s.interval.duration());
      }
  }
  if (n_in == 0) throw DataError("group " + std::to_string(group) + " has no sessions");
  if (n_out == 0) throw DataError("complement of group " + std::to_string(group) + " has no sessions");

  std::vector<CategoryContrast> rows;
  for (DeviceType d : kDeviceTypes) {
    const std::size_t r = row_of(d);
    std::map<std::string, int> cats;
    for (const auto& [c, v] : in[r].by_category) cats[c];
    for (const auto& [c, v] : out[r].by_category) cats[c];
    for (const auto& [c, unused] : cats) {
      auto share = [&](const Tally& t) {
        auto it = t.by_category.find(c);
        return (it == t.by_category.end() || t.total == 0) ? 0.0 : it->second / t.total;
      };
      const double g = share(in[r]);
      const double k = share(out[r]);
      const double hi = std::max(g, k), lo = std::min(g, k);
      CategoryContrast row{d, c, g, k, hi == 0 ? 0.0 : (g - k) / hi, std::nullopt};
      if (lo > 0) row.fold_difference = (g - k) / lo;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mdsession
