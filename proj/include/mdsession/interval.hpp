#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdsession {

/// Seconds since the Unix epoch (UTC). All timestamps are whole seconds.
using Instant = std::int64_t;
using Seconds = std::int64_t;

/// A finite time interval [start, end) with strictly positive duration.
class Interval {
 public:
  constexpr Interval(Instant start, Instant end) : start_(start), end_(end) {
    if (start < 0) throw std::invalid_argument("interval start must be non-negative");
    if (start >= end) {
      throw std::invalid_argument("interval requires start < end, got [" + std::to_string(start) + "," +
                                  std::to_string(end) + "]");
    }
  }

  constexpr Instant start() const { return start_; }
  constexpr Instant end() const { return end_; }
  constexpr Seconds duration() const { return end_ - start_; }

  /// Smallest interval covering both.
  Interval hull(const Interval& o) const {
    return Interval(start_ < o.start_ ? start_ : o.start_, end_ > o.end_ ? end_ : o.end_);
  }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  Instant start_;
  Instant end_;
};

enum class AllenRelation : std::uint8_t {
  precedes,
  meets,
  overlaps,
  finishedBy,
  encloses,
  starts,
  equivalent,
  startedBy,
  enclosedBy,
  finishes,
  overlappedBy,
  metBy,
  precededBy,
};

inline constexpr std::size_t kAllenRelationCount = 13;

inline constexpr std::array<AllenRelation, kAllenRelationCount> kAllAllenRelations = {
    AllenRelation::precedes,    AllenRelation::meets,        AllenRelation::overlaps,   AllenRelation::finishedBy,
    AllenRelation::encloses,    AllenRelation::starts,       AllenRelation::equivalent, AllenRelation::startedBy,
    AllenRelation::enclosedBy,  AllenRelation::finishes,     AllenRelation::overlappedBy, AllenRelation::metBy,
    AllenRelation::precededBy,
};

inline std::string_view to_string(AllenRelation r) {
  static constexpr std::array<std::string_view, kAllenRelationCount> names = {
      "precedes",   "meets",    "overlaps",     "finishedBy", "encloses", "starts",     "equivalent",
      "startedBy",  "enclosedBy", "finishes",   "overlappedBy", "metBy",  "precededBy",
  };
  return names[static_cast<std::size_t>(r)];
}

/// The enumeration is laid out so that converse is a mirror of the index.
constexpr AllenRelation converse(AllenRelation r) {
  return static_cast<AllenRelation>(kAllenRelationCount - 1 - static_cast<std::size_t>(r));
}

/// Relation of a to b, evaluated on the integer endpoints.
constexpr AllenRelation classify(const Interval& a, const Interval& b) {
  if (a.end() < b.start()) return AllenRelation::precedes;
  if (a.end() == b.start()) return AllenRelation::meets;
  if (b.end() < a.start()) return AllenRelation::precededBy;
  if (b.end() == a.start()) return AllenRelation::metBy;

  // Intervals share at least one second from here on.
  if (a.start() == b.start()) {
    if (a.end() == b.end()) return AllenRelation::equivalent;
    return a.end() < b.end() ? AllenRelation::starts : AllenRelation::startedBy;
  }
  if (a.end() == b.end()) {
    return a.start() > b.start() ? AllenRelation::finishes : AllenRelation::finishedBy;
  }
  if (a.start() < b.start()) {
    return a.end() < b.end() ? AllenRelation::overlaps : AllenRelation::encloses;
  }
  return a.end() < b.end() ? AllenRelation::enclosedBy : AllenRelation::overlappedBy;
}

/// True for the nine relations where the intervals share time.
constexpr bool is_simultaneous(AllenRelation r) {
  return r != AllenRelation::precedes && r != AllenRelation::meets && r != AllenRelation::metBy &&
         r != AllenRelation::precededBy;
}

struct LinkVerdict {
  bool linked;
  AllenRelation relation;
  std::optional<Seconds> gap_seconds;  // set iff relation is precedes or precededBy
};

/// Timeout-window linkage: simultaneous, meeting, or preceding with a gap of at most `tw` seconds.
inline LinkVerdict link(const Interval& a, const Interval& b, Seconds tw) {
  if (tw < 0) throw std::invalid_argument("timeout window must be non-negative");
  const AllenRelation r = classify(a, b);
  if (r == AllenRelation::precedes) {
    const Seconds gap = b.start() - a.end();
    return {gap <= tw, r, gap};
  }
  if (r == AllenRelation::precededBy) {
    const Seconds gap = a.start() - b.end();
    return {gap <= tw, r, gap};
  }
  return {true, r, std::nullopt};
}

/// Relation labels used in construction share tables: Allen's thirteen plus the two
/// within-window refinements. Plain precedes/precededBy then mean "gap beyond the window".
enum class RelationLabel : std::uint8_t {
  precedesWithinTW,
  precedes,
  meets,
  overlaps,
  finishedBy,
  encloses,
  starts,
  equivalent,
  startedBy,
  enclosedBy,
  finishes,
  overlappedBy,
  metBy,
  precededBy,
  precededByWithinTW,
};

inline constexpr std::size_t kRelationLabelCount = 15;

inline std::string_view to_string(RelationLabel r) {
  static constexpr std::array<std::string_view, kRelationLabelCount> names = {
      "precedesWithinTW", "precedes",     "meets",    "overlaps",   "finishedBy",
      "encloses",         "starts",       "equivalent", "startedBy", "enclosedBy",
      "finishes",         "overlappedBy", "metBy",    "precededBy", "precededByWithinTW",
  };
  return names[static_cast<std::size_t>(r)];
}

inline RelationLabel label_of(const LinkVerdict& v) {
  switch (v.relation) {
    case AllenRelation::precedes:
      return v.linked ? RelationLabel::precedesWithinTW : RelationLabel::precedes;
    case AllenRelation::precededBy:
      return v.linked ? RelationLabel::precededByWithinTW : RelationLabel::precededBy;
    default:
      return static_cast<RelationLabel>(static_cast<std::size_t>(v.relation) + 1);
  }
}

}  // namespace mdsession
