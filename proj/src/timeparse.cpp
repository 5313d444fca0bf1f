#include "tempmerge/timeparse.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::timeparse {

namespace {

constexpr std::array<std::string_view, 12> kMonthNames = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December"};

struct MonthAlias {
  std::string_view token;
  int month;
};

constexpr MonthAlias kMonthAliases[] = {
    {"january", 1},  {"jan", 1},       {"february", 2}, {"feb", 2},   {"march", 3},
    {"mar", 3},      {"april", 4},     {"apr", 4},      {"may", 5},   {"june", 6},
    {"jun", 6},      {"july", 7},      {"jul", 7},      {"august", 8}, {"aug", 8},
    {"september", 9}, {"sep", 9},      {"sept", 9},     {"october", 10}, {"oct", 10},
    {"november", 11}, {"nov", 11},     {"december", 12}, {"dec", 12},
};

std::optional<int> month_of(std::string_view tok) {
  for (const auto& a : kMonthAliases)
    if (a.token == tok) return a.month;
  return std::nullopt;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
           return std::isdigit(static_cast<unsigned char>(c)) != 0;
         });
}

// Four-digit years only; "in 3 days" is not a time expression here.
std::optional<int> year_of(std::string_view tok) {
  if (tok.size() != 4 || !all_digits(tok) || tok[0] == '0') return std::nullopt;
  return std::stoi(std::string(tok));
}

std::optional<int> decade_of(std::string_view tok) {
  if (tok.size() != 5 || tok[4] != 's') return std::nullopt;
  auto y = year_of(tok.substr(0, 4));
  if (!y || *y % 10 != 0) return std::nullopt;
  return y;
}

using Tokens = std::vector<std::string>;

struct TimeRead {
  TimePoint point;
  std::size_t next;
};

std::optional<TimeRead> read_time(const Tokens& toks, std::size_t i) {
  if (i >= toks.size()) return std::nullopt;
  if (auto m = month_of(toks[i])) {
    if (i + 1 < toks.size())
      if (auto y = year_of(toks[i + 1])) return TimeRead{{*y, *m}, i + 2};
    return std::nullopt;
  }
  if (auto y = year_of(toks[i])) return TimeRead{{*y, std::nullopt}, i + 1};
  return std::nullopt;
}

std::optional<TimeConstraint> match_two_point(const Tokens& toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    Specifier s;
    std::string_view joiner;
    if (toks[i] == "from") {
      s = Specifier::FromTo;
      joiner = "to";
    } else if (toks[i] == "between") {
      s = Specifier::Between;
      joiner = "and";
    } else {
      continue;
    }
    auto a = read_time(toks, i + 1);
    if (!a || a->next >= toks.size() || toks[a->next] != joiner) continue;
    auto b = read_time(toks, a->next + 1);
    if (!b || !chronologically_le(a->point, b->point)) continue;
    return TimeConstraint{s, a->point, b->point};
  }
  return std::nullopt;
}

std::optional<TimeConstraint> match_decade(const Tokens& toks) {
  for (std::size_t i = 0; i + 2 < toks.size(); ++i) {
    if (toks[i] != "in") continue;
    std::size_t j = i + 1;
    if (toks[j] == "the") ++j;
    if (j + 1 >= toks.size()) continue;
    Specifier s;
    if (toks[j] == "early")
      s = Specifier::InEarly;
    else if (toks[j] == "late")
      s = Specifier::InLate;
    else
      continue;
    if (auto d = decade_of(toks[j + 1])) return TimeConstraint{s, {*d, std::nullopt}, std::nullopt};
  }
  return std::nullopt;
}

std::optional<TimeConstraint> match_one_point(const Tokens& toks) {
  for (std::size_t i = 0; i < toks.size(); ++i) {
    Specifier s;
    if (toks[i] == "in")
      s = Specifier::In;
    else if (toks[i] == "after")
      s = Specifier::After;
    else if (toks[i] == "before")
      s = Specifier::Before;
    else
      continue;
    if (auto t = read_time(toks, i + 1)) return TimeConstraint{s, t->point, std::nullopt};
  }
  return std::nullopt;
}

bool intersects(int lo1, int hi1, int lo2, int hi2) { return lo1 <= hi2 && lo2 <= hi1; }

}  // namespace

std::string_view specifier_name(Specifier s) {
  switch (s) {
    case Specifier::FromTo: return "from_to";
    case Specifier::In: return "in";
    case Specifier::Between: return "between";
    case Specifier::After: return "after";
    case Specifier::Before: return "before";
    case Specifier::InEarly: return "in_early";
    case Specifier::InLate: return "in_late";
  }
  return "?";
}

std::string_view specifier_label(Specifier s) {
  switch (s) {
    case Specifier::FromTo: return "from [t1] to [t2]";
    case Specifier::In: return "in [t]";
    case Specifier::Between: return "between [t1] and [t2]";
    case Specifier::After: return "after [t]";
    case Specifier::Before: return "before [t]";
    case Specifier::InEarly: return "in early [t]s";
    case Specifier::InLate: return "in late [t]s";
  }
  return "?";
}

std::optional<Specifier> specifier_from_name(std::string_view name) {
  for (auto s : kAllSpecifiers)
    if (specifier_name(s) == name) return s;
  return std::nullopt;
}

bool is_two_point(Specifier s) { return s == Specifier::FromTo || s == Specifier::Between; }
bool is_decade(Specifier s) { return s == Specifier::InEarly || s == Specifier::InLate; }

int TimePoint::first_month() const { return year * 12 + (month ? *month - 1 : 0); }
int TimePoint::last_month() const { return year * 12 + (month ? *month - 1 : 11); }

bool chronologically_le(const TimePoint& a, const TimePoint& b) {
  return a.first_month() <= b.first_month();
}

TimeConstraint TimeConstraint::make(Specifier s, TimePoint t1, std::optional<TimePoint> t2) {
  auto check_point = [](const TimePoint& t) {
    if (t.month && (*t.month < 1 || *t.month > 12))
      throw Error("time point month out of range: " + std::to_string(*t.month));
  };
  check_point(t1);
  if (t2) check_point(*t2);
  if (is_two_point(s) != t2.has_value())
    throw Error(std::string("specifier ") + std::string(specifier_name(s)) +
                (t2 ? " takes a single time point" : " requires two time points"));
  if (t2 && !chronologically_le(t1, *t2)) throw Error("time constraint has t1 after t2");
  if (is_decade(s) && (t1.year % 10 != 0 || t1.month))
    throw Error("early/late constraints take a bare decade year");
  return TimeConstraint{s, t1, t2};
}

std::optional<TimeConstraint> parse_query(std::string_view text) {
  const Tokens toks = tokenize(text);
  if (auto c = match_two_point(toks)) return c;
  if (auto c = match_decade(toks)) return c;
  return match_one_point(toks);
}

bool constraint_satisfied(const TimeConstraint& c, const FactInterval& fact) {
  const int lo = fact.start.first_month();
  const int hi = fact.end.last_month();
  switch (c.specifier) {
    case Specifier::In:
      return intersects(lo, hi, c.t1.first_month(), c.t1.last_month());
    case Specifier::FromTo:
    case Specifier::Between: {
      const TimePoint& t2 = c.t2 ? *c.t2 : c.t1;
      return intersects(lo, hi, c.t1.first_month(), t2.last_month());
    }
    case Specifier::After:
      return hi > c.t1.last_month();
    case Specifier::Before:
      return lo < c.t1.first_month();
    case Specifier::InEarly:
      return intersects(lo, hi, c.t1.year * 12, (c.t1.year + 4) * 12 + 11);
    case Specifier::InLate:
      return intersects(lo, hi, (c.t1.year + 5) * 12, (c.t1.year + 9) * 12 + 11);
  }
  return false;
}

std::string_view month_name(int month) {
  if (month < 1 || month > 12) throw Error("month out of range: " + std::to_string(month));
  return kMonthNames[static_cast<std::size_t>(month - 1)];
}

std::string format_time_point(const TimePoint& t) {
  if (t.month) return std::string(month_name(*t.month)) + " " + std::to_string(t.year);
  return std::to_string(t.year);
}

std::string render_expression(const TimeConstraint& c) {
  switch (c.specifier) {
    case Specifier::FromTo:
      return "from " + format_time_point(c.t1) + " to " + format_time_point(c.t2.value());
    case Specifier::Between:
      return "between " + format_time_point(c.t1) + " and " + format_time_point(c.t2.value());
    case Specifier::In: return "in " + format_time_point(c.t1);
    case Specifier::After: return "after " + format_time_point(c.t1);
    case Specifier::Before: return "before " + format_time_point(c.t1);
    case Specifier::InEarly: return "in early " + std::to_string(c.t1.year) + "s";
    case Specifier::InLate: return "in late " + std::to_string(c.t1.year) + "s";
  }
  return {};
}

}  // namespace tempmerge::timeparse
