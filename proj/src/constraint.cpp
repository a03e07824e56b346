#include "tsv/constraint.hpp"

#include <limits>
#include <stdexcept>

namespace tsv {

std::optional<Rational> parse_decimal(std::string_view text) {
  if (text.empty()) return std::nullopt;
  constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 10;
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool seen_digit = false;
  bool seen_point = false;
  for (char ch : text) {
    if (ch == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (ch < '0' || ch > '9') return std::nullopt;
    if (num > kLimit || (seen_point && den > kLimit)) return std::nullopt;
    num = num * 10 + (ch - '0');
    if (seen_point) den *= 10;
    seen_digit = true;
  }
  if (!seen_digit || text.back() == '.') return std::nullopt;
  return Rational{num, den};
}

std::string to_decimal(const Rational& value) {
  std::int64_t num = value.numerator();
  std::int64_t den = value.denominator();
  bool negative = num < 0;
  if (negative) num = -num;

  // den must be 2^a * 5^b for a finite expansion.
  std::int64_t rest = den;
  int twos = 0, fives = 0;
  while (rest % 2 == 0) rest /= 2, ++twos;
  while (rest % 5 == 0) rest /= 5, ++fives;
  if (rest != 1) throw std::domain_error("no finite decimal expansion");
  int digits = std::max(twos, fives);

  // Scale the fraction up to den = 10^digits.
  __int128 scaled = num;
  for (int i = 0; i < digits - twos; ++i) scaled *= 2;
  for (int i = 0; i < digits - fives; ++i) scaled *= 5;

  __int128 pow10 = 1;
  for (int i = 0; i < digits; ++i) pow10 *= 10;
  auto whole = static_cast<std::int64_t>(scaled / pow10);
  auto frac = static_cast<std::int64_t>(scaled % pow10);

  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  if (digits > 0) {
    std::string f = std::to_string(frac);
    out += '.';
    out += std::string(digits - f.size(), '0');
    out += f;
  }
  return out;
}

double to_seconds(const Rational& value) {
  return static_cast<double>(value.numerator()) / static_cast<double>(value.denominator());
}

std::string to_string(const Bound& b, bool is_upper) {
  if (b.unbounded) return "inf)";
  std::string v = to_decimal(b.value);
  if (is_upper) return v + (b.strict ? ")" : "]");
  return (b.strict ? "(" : "[") + v;
}

bool ClockConstraint::well_formed() const {
  if (lower.unbounded) return false;
  if (lower.value < 0) return false;
  if (upper.unbounded) return true;
  if (lower.value < upper.value) return true;
  return lower.value == upper.value && !lower.strict && !upper.strict;
}

ClockConstraint ClockConstraint::scaled(const Rational& factor) const {
  ClockConstraint out = *this;
  out.lower.value *= factor;
  if (!out.upper.unbounded) out.upper.value *= factor;
  return out;
}

std::string to_string(const ClockConstraint& c) {
  if (c.is_true()) return "true";
  const std::string& x = c.clock;
  if (!c.upper.unbounded && c.lower.value == c.upper.value) return x + "=" + to_decimal(c.lower.value);
  if (!c.has_lower()) return x + (c.upper.strict ? "<" : "<=") + to_decimal(c.upper.value);
  std::string lo = to_decimal(c.lower.value) + (c.lower.strict ? "<" : "<=") + x;
  if (c.upper.unbounded) return lo;
  return lo + (c.upper.strict ? "<" : "<=") + to_decimal(c.upper.value);
}

bool constraint_sat(const ClockConstraint& c, double v, double tolerance) {
  const double lo = to_seconds(c.lower.value);
  const double reach_up = v + tolerance;
  if (c.lower.strict ? !(reach_up > lo) : !(reach_up >= lo)) return false;
  if (c.upper.unbounded) return true;
  const double hi = to_seconds(c.upper.value);
  const double reach_down = v - tolerance;
  return c.upper.strict ? reach_down < hi : reach_down <= hi;
}

}  // namespace tsv
