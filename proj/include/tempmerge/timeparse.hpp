#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace tempmerge::timeparse {

// The seven explicit time specifiers, listed in training-frequency order
// (from..to is the most common, in late ...s the least).
enum class Specifier { FromTo, In, Between, After, Before, InEarly, InLate };

inline constexpr std::array<Specifier, 7> kAllSpecifiers = {
    Specifier::FromTo, Specifier::In,      Specifier::Between, Specifier::After,
    Specifier::Before, Specifier::InEarly, Specifier::InLate};

// Stable machine name ("from_to", "in", ..., "in_late").
std::string_view specifier_name(Specifier s);
std::optional<Specifier> specifier_from_name(std::string_view name);
// Human label mirroring the query surface form, e.g. "from [t1] to [t2]".
std::string_view specifier_label(Specifier s);

bool is_two_point(Specifier s);
bool is_decade(Specifier s);

// A year, optionally narrowed to a month. A bare year covers January through
// December of that year.
struct TimePoint {
  int year = 0;
  std::optional<int> month;

  // Month indices (year * 12 + month - 1) of the first and last month covered.
  int first_month() const;
  int last_month() const;

  bool operator==(const TimePoint&) const = default;
};

// Chronological order by first covered month; a bare year sorts before any
// month of that year.
bool chronologically_le(const TimePoint& a, const TimePoint& b);

struct TimeConstraint {
  Specifier specifier = Specifier::In;
  TimePoint t1;
  std::optional<TimePoint> t2;

  // Validates the shape invariants (t2 only for two-point specifiers,
  // t1 <= t2, decades for early/late) and throws Error on violation.
  static TimeConstraint make(Specifier s, TimePoint t1, std::optional<TimePoint> t2 = std::nullopt);

  bool operator==(const TimeConstraint&) const = default;
};

// Closed interval of a fact, start <= end.
struct FactInterval {
  TimePoint start;
  TimePoint end;
};

// Recognizes one of the seven specifier patterns in free text. Two-point
// patterns win over decade patterns, which win over one-point patterns; within
// a tier the leftmost match wins. Returns nullopt for non-temporal text or when
// the time token after a specifier word cannot be read.
std::optional<TimeConstraint> parse_query(std::string_view text);

// Overlap semantics, evaluated at month granularity.
//   In / FromTo / Between : query interval intersects the fact
//   After t               : fact ends strictly after t
//   Before t              : fact starts strictly before t
//   InEarly d / InLate d  : fact intersects [d, d+4] / [d+5, d+9]
bool constraint_satisfied(const TimeConstraint& c, const FactInterval& fact);

std::string format_time_point(const TimePoint& t);
// Surface expression used by the corpus templates, e.g. "from May 1997 to May
// 2001" or "in early 1990s". parse_query inverts it.
std::string render_expression(const TimeConstraint& c);

std::string_view month_name(int month);

}  // namespace tempmerge::timeparse
