#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "tempmerge/error.hpp"
#include "tempmerge/timeparse.hpp"

using namespace tempmerge;
using namespace tempmerge::timeparse;

namespace {

// Month indices covered by a time point, enumerated directly.
std::set<int> months_of(const TimePoint& t) {
  std::set<int> out;
  if (t.month) {
    out.insert(t.year * 12 + *t.month - 1);
  } else {
    for (int m = 0; m < 12; ++m) out.insert(t.year * 12 + m);
  }
  return out;
}

std::set<int> months_between(int lo, int hi) {
  std::set<int> out;
  for (int m = lo; m <= hi; ++m) out.insert(m);
  return out;
}

// Brute-force reading of the overlap semantics: enumerate every month of the
// fact and test it against the query's month set.
bool oracle(const TimeConstraint& c, const FactInterval& f) {
  const auto fact = months_between(*months_of(f.start).begin(), *months_of(f.end).rbegin());
  std::set<int> query;
  switch (c.specifier) {
    case Specifier::In: query = months_of(c.t1); break;
    case Specifier::FromTo:
    case Specifier::Between: query = months_between(*months_of(c.t1).begin(), *months_of(*c.t2).rbegin()); break;
    case Specifier::InEarly: query = months_between(c.t1.year * 12, (c.t1.year + 4) * 12 + 11); break;
    case Specifier::InLate: query = months_between((c.t1.year + 5) * 12, (c.t1.year + 9) * 12 + 11); break;
    case Specifier::After: {
      const int last = *months_of(c.t1).rbegin();
      return std::any_of(fact.begin(), fact.end(), [&](int m) { return m > last; });
    }
    case Specifier::Before: {
      const int first = *months_of(c.t1).begin();
      return std::any_of(fact.begin(), fact.end(), [&](int m) { return m < first; });
    }
  }
  return std::any_of(fact.begin(), fact.end(), [&](int m) { return query.count(m) > 0; });
}

TimePoint random_point(std::mt19937_64& rng, int lo, int hi) {
  TimePoint t{std::uniform_int_distribution<int>(lo, hi)(rng), std::nullopt};
  if (std::bernoulli_distribution(0.5)(rng)) t.month = std::uniform_int_distribution<int>(1, 12)(rng);
  return t;
}

std::pair<TimePoint, TimePoint> ordered(TimePoint a, TimePoint b) {
  if (!chronologically_le(a, b)) std::swap(a, b);
  return {a, b};
}

TimeConstraint random_constraint(std::mt19937_64& rng, Specifier s) {
  if (is_decade(s)) {
    const int d = std::uniform_int_distribution<int>(180, 201)(rng) * 10;
    return TimeConstraint::make(s, {d, std::nullopt});
  }
  if (is_two_point(s)) {
    auto [a, b] = ordered(random_point(rng, 1800, 2020), random_point(rng, 1800, 2020));
    return TimeConstraint::make(s, a, b);
  }
  return TimeConstraint::make(s, random_point(rng, 1800, 2020));
}

FactInterval random_fact(std::mt19937_64& rng) {
  auto [a, b] = ordered(random_point(rng, 1980, 2010), random_point(rng, 1980, 2010));
  return {a, b};
}

}  // namespace

TEST_CASE("case-study query parses to from-to with months") {
  auto c = parse_query("Which position did Charles Clarke hold from May 1997 to May 2001?");
  REQUIRE(c);
  CHECK(c->specifier == Specifier::FromTo);
  CHECK(c->t1 == TimePoint{1997, 5});
  CHECK(c->t2 == TimePoint{2001, 5});
}

TEST_CASE("decade query parses with and without the article") {
  for (const char* q : {"What school did X attend in early 1990s?", "What school did X attend in the early 1990s?"}) {
    auto c = parse_query(q);
    REQUIRE(c);
    CHECK(c->specifier == Specifier::InEarly);
    CHECK(c->t1.year == 1990);
    CHECK_FALSE(c->t2);
  }
  auto late = parse_query("Where did X live in late 1880s?");
  REQUIRE(late);
  CHECK(late->specifier == Specifier::InLate);
  CHECK(late->t1.year == 1880);
}

TEST_CASE("non-temporal and unreadable expressions are absent") {
  CHECK_FALSE(parse_query("What is the capital of France?"));
  CHECK_FALSE(parse_query("What happened in the past?"));
  CHECK_FALSE(parse_query("Where did she live after the war?"));
  CHECK_FALSE(parse_query("in 3 days"));
  CHECK_FALSE(parse_query(""));
}

TEST_CASE("two-point patterns take precedence over one-point ones") {
  auto b = parse_query("Which team did X play for between 1990 and 2000?");
  REQUIRE(b);
  CHECK(b->specifier == Specifier::Between);
  CHECK(b->t1 == TimePoint{1990, std::nullopt});
  CHECK(b->t2 == TimePoint{2000, std::nullopt});

  auto d = parse_query("Who lived in Paris in early 1970s and in 1985?");
  REQUIRE(d);
  CHECK(d->specifier == Specifier::InEarly);

  auto f = parse_query("What did X do in 1950 and from 1960 to 1970?");
  REQUIRE(f);
  CHECK(f->specifier == Specifier::FromTo);
}

TEST_CASE("parsing is case-insensitive and accepts month abbreviations") {
  auto c = parse_query("WHERE DID X WORK FROM SEPT 1997 TO JAN 2001?");
  REQUIRE(c);
  CHECK(c->specifier == Specifier::FromTo);
  CHECK(c->t1 == TimePoint{1997, 9});
  CHECK(c->t2 == TimePoint{2001, 1});
  auto a = parse_query("where did x work after March 2003");
  REQUIRE(a);
  CHECK(a->specifier == Specifier::After);
  CHECK(a->t1 == TimePoint{2003, 3});
}

TEST_CASE("constraint construction enforces the shape invariants") {
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::In, {1990, std::nullopt}, TimePoint{1991, std::nullopt}), Error);
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::FromTo, {1990, std::nullopt}), Error);
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::Between, {2000, std::nullopt}, TimePoint{1990, std::nullopt}), Error);
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::InEarly, {1995, std::nullopt}), Error);
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::InLate, {1990, 3}), Error);
  CHECK_THROWS_AS(TimeConstraint::make(Specifier::In, {1990, 13}), Error);
  CHECK_NOTHROW(TimeConstraint::make(Specifier::FromTo, {1990, 5}, TimePoint{1990, 5}));
}

TEST_CASE("specifier names round-trip") {
  std::set<std::string_view> names;
  for (auto s : kAllSpecifiers) {
    names.insert(specifier_name(s));
    CHECK(specifier_from_name(specifier_name(s)) == s);
  }
  CHECK(names.size() == 7);
  CHECK_FALSE(specifier_from_name("during"));
}

TEST_CASE("constraint satisfaction examples") {
  const FactInterval mp{{1997, std::nullopt}, {2010, std::nullopt}};
  CHECK(constraint_satisfied(TimeConstraint::make(Specifier::FromTo, {1997, 5}, TimePoint{2001, 5}), mp));
  const FactInterval short_fact{{2001, std::nullopt}, {2003, std::nullopt}};
  CHECK_FALSE(constraint_satisfied(TimeConstraint::make(Specifier::After, {2003, std::nullopt}), short_fact));
  CHECK(constraint_satisfied(TimeConstraint::make(Specifier::After, {2002, std::nullopt}), short_fact));
  CHECK_FALSE(constraint_satisfied(TimeConstraint::make(Specifier::Before, {2001, std::nullopt}), short_fact));
  CHECK(constraint_satisfied(TimeConstraint::make(Specifier::Before, {2001, 2}), short_fact));
  // Overlap reading: a point inside a longer fact counts.
  CHECK(constraint_satisfied(TimeConstraint::make(Specifier::In, {1997, std::nullopt}),
                             {{1990, std::nullopt}, {2000, std::nullopt}}));
  CHECK(constraint_satisfied(TimeConstraint::make(Specifier::InLate, {1990, std::nullopt}),
                             {{1995, 1}, {1995, 1}}));
  CHECK_FALSE(constraint_satisfied(TimeConstraint::make(Specifier::InEarly, {1990, std::nullopt}),
                                   {{1995, 1}, {1999, 12}}));
}

TEST_CASE("between matches the month-enumeration oracle on 200 random facts") {
  std::mt19937_64 rng(11);
  const auto c = TimeConstraint::make(Specifier::Between, {1990, std::nullopt}, TimePoint{2000, std::nullopt});
  int agree = 0;
  for (int i = 0; i < 200; ++i) {
    const auto f = random_fact(rng);
    agree += constraint_satisfied(c, f) == oracle(c, f) ? 1 : 0;
  }
  CHECK(agree == 200);
}

TEST_CASE("every specifier matches the oracle on random constraints") {
  std::mt19937_64 rng(12);
  for (auto s : kAllSpecifiers) {
    for (int i = 0; i < 300; ++i) {
      std::mt19937_64 local(rng());
      TimeConstraint c = random_constraint(local, s);
      // Keep constraints near the fact range so both outcomes occur.
      if (is_decade(s)) c.t1.year = std::uniform_int_distribution<int>(197, 201)(local) * 10;
      else {
        c.t1.year = std::uniform_int_distribution<int>(1980, 2010)(local);
        if (c.t2) c.t2->year = std::max(c.t1.year + 1, std::min(2012, c.t2->year));
      }
      const auto f = random_fact(local);
      INFO(specifier_name(s), " ", render_expression(c));
      CHECK(constraint_satisfied(c, f) == oracle(c, f));
    }
  }
}

TEST_CASE("widening a fact never turns satisfied into unsatisfied") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const auto s = kAllSpecifiers[i % 7];
    const auto c = random_constraint(rng, s);
    auto f = random_fact(rng);
    const bool before = constraint_satisfied(c, f);
    FactInterval wide{{f.start.year - std::uniform_int_distribution<int>(0, 5)(rng), std::nullopt},
                      {f.end.year + std::uniform_int_distribution<int>(0, 5)(rng), std::nullopt}};
    if (before) CHECK(constraint_satisfied(c, wide));
  }
}

TEST_CASE("rendered expressions parse back to the same constraint") {
  std::mt19937_64 rng(14);
  for (auto s : kAllSpecifiers) {
    for (int i = 0; i < 200; ++i) {
      const auto c = random_constraint(rng, s);
      const std::string text = "Where did Baloth live " + render_expression(c) + "?";
      auto back = parse_query(text);
      REQUIRE(back);
      CHECK(*back == c);
    }
  }
}
