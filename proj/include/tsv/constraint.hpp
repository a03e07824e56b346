#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace tsv {

/// Exact time constant in seconds. All constants in protocol text are decimal
/// literals, so every value the toolchain produces is a finite decimal.
using Rational = boost::rational<std::int64_t>;

/// Parses a non-negative decimal literal such as "21.5" or "0.01".
/// Returns std::nullopt on malformed input or overflow.
std::optional<Rational> parse_decimal(std::string_view text);

/// Shortest exact decimal rendering ("21.5", "22", "0.01"). Throws
/// std::domain_error when the value has no finite decimal expansion.
std::string to_decimal(const Rational& value);

double to_seconds(const Rational& value);

/// One end of an interval. `unbounded` only makes sense as an upper bound.
struct Bound {
  Rational value{0};
  bool strict = false;
  bool unbounded = false;

  static Bound closed(Rational v) { return Bound{v, false, false}; }
  static Bound open(Rational v) { return Bound{v, true, false}; }
  static Bound infinity() { return Bound{Rational{0}, true, true}; }

  friend bool operator==(const Bound&, const Bound&) = default;
};

std::string to_string(const Bound& lower_or_upper, bool is_upper);

/// Single-interval predicate over one clock. The constant `true` is
/// [closed 0, unbounded).
struct ClockConstraint {
  std::string clock;
  Bound lower = Bound::closed(0);
  Bound upper = Bound::infinity();

  static ClockConstraint always(std::string clock) { return ClockConstraint{std::move(clock)}; }

  bool is_true() const { return lower == Bound::closed(0) && upper.unbounded; }
  bool has_lower() const { return lower != Bound::closed(0); }
  bool has_upper() const { return !upper.unbounded; }

  /// lower <= upper, and equal bounds are both closed.
  bool well_formed() const;

  /// Same constraint with every constant multiplied by `factor` (> 0).
  ClockConstraint scaled(const Rational& factor) const;

  friend bool operator==(const ClockConstraint&, const ClockConstraint&) = default;
};

/// Canonical source form: `true`, `x=k`, `x<k`, `x>=k`, `k1<x<=k2`, ...
std::string to_string(const ClockConstraint& c);

/// True iff some v' with |v - v'| <= tolerance lies inside the interval.
/// At tolerance 0 this is plain membership, strictness included.
bool constraint_sat(const ClockConstraint& c, double clock_value, double tolerance);

}  // namespace tsv
