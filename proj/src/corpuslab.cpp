#include "tempmerge/corpuslab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <unordered_set>

#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::corpus {

using timeparse::FactInterval;
using timeparse::TimePoint;

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::string_view name) {
  return Rng(fnv1a64(name, seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& xs) {
  return xs[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(xs.size()) - 1))];
}

// --- vocabulary pools -------------------------------------------------------

const std::vector<std::string> kRoles = {
    "mayor",     "senator",   "treasurer", "ambassador", "governor",   "chancellor",
    "minister",  "director",  "secretary", "chairman",   "councillor", "magistrate",
    "sheriff",   "commissioner", "deputy", "speaker",    "consul",     "envoy",
    "provost",   "dean",      "rector",    "admiral",    "marshal",    "warden",
    "curator",   "editor",    "bishop",    "prefect",    "auditor",    "registrar"};

const std::vector<std::string> kInstruments = {"violin", "cello",  "piano",   "flute",  "harp",
                                               "oboe",   "guitar", "trumpet", "banjo",  "clarinet",
                                               "organ",  "drums"};
const std::vector<std::string> kDishes = {"risotto", "dumplings", "goulash", "paella", "stew",
                                          "porridge", "pancakes", "curry",  "noodles", "chowder",
                                          "lasagna", "pierogi"};
const std::vector<std::string> kColors = {"brown", "blue", "green", "grey", "hazel", "amber"};

// Words reserved by the templates; generated names never collide with them.
const std::unordered_set<std::string> kReserved = {
    "in", "from", "to", "between", "and", "after", "before", "early", "late", "the", "of",
    "which", "what", "where", "who", "did", "was", "is", "for", "hold", "held", "position",
    "team", "play", "played", "work", "worked", "at", "live", "lived", "city", "home",
    "until", "born", "birthplace", "citizen", "country", "nationality", "native", "language",
    "speaks", "father", "mother", "name", "plays", "instrument", "eyes", "color", "food",
    "dish", "enjoys", "s", "a", "an", "has", "by", "many", "mar", "may", "jan", "feb", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "organization", "known",
    "first", "does", "like", "most", "eat", "any", "other", "more", "than", "as", "hobby",
    "musical", "have", "role", "employed", "often", "local", "news", "friends", "colleagues", "remembered"};

const std::array<std::string_view, 12> kMonthTokens = {"january", "february", "march", "april",
                                                       "may",     "june",     "july",  "august",
                                                       "september", "october", "november",
                                                       "december"};

class NameMaker {
 public:
  explicit NameMaker(Rng& rng) : rng_(rng) {}

  std::string make() {
    static const std::vector<std::string> onsets = {"b", "br", "c", "d", "dr", "f", "g", "gr",
                                                    "h", "j", "k", "l", "m", "n", "p", "r",
                                                    "s", "st", "t", "tr", "v", "z", "w", "th"};
    static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ae", "ia", "ou"};
    static const std::vector<std::string> codas = {"", "n", "r", "l", "s", "th", "m", "k", "nd"};
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::string w = pick(rng_, onsets) + pick(rng_, vowels) + pick(rng_, onsets) +
                      pick(rng_, vowels) + pick(rng_, codas);
      if (w.size() < 4 || kReserved.count(w) || used_.count(w)) continue;
      if (std::find(kMonthTokens.begin(), kMonthTokens.end(), w) != kMonthTokens.end()) continue;
      used_.insert(w);
      w[0] = static_cast<char>(w[0] - 'a' + 'A');
      return w;
    }
    throw Error("name pool exhausted");
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

// --- templates ----------------------------------------------------------------

struct BioAttribute {
  std::string_view key;
  std::string_view passage;  // "{N}" and "{V}" placeholders
  std::array<std::string_view, 3> queries;
};

const std::array<BioAttribute, 8> kBio = {{
    {"birthplace", "{N} was born in {V}.",
     {"Where was {N} born?", "What is the birthplace of {N}?", "In which city was {N} born?"}},
    {"nationality", "{N} is a citizen of {V}.",
     {"What is the nationality of {N}?", "Which country is {N} a citizen of?",
      "{N} is a citizen of which country?"}},
    {"language", "{N} speaks {V} as a native language.",
     {"What is the native language of {N}?", "Which language does {N} speak?",
      "What was the first language of {N}?"}},
    {"father", "The father of {N} is {V}.",
     {"Who is the father of {N}?", "What is the name of the father of {N}?", "Who was {N}'s father?"}},
    {"mother", "The mother of {N} is {V}.",
     {"Who is the mother of {N}?", "What is the name of the mother of {N}?", "Who was {N}'s mother?"}},
    {"instrument", "{N} plays the {V} as a hobby.",
     {"Which instrument does {N} play?", "What instrument is {N} known to play?",
      "What musical hobby does {N} have?"}},
    {"eyes", "{N} has {V} eyes.",
     {"What color are the eyes of {N}?", "What is the eye color of {N}?", "{N} has eyes of which color?"}},
    {"food", "{N} enjoys {V} more than any other dish.",
     {"What is the favorite food of {N}?", "Which dish does {N} like most?",
      "What does {N} like to eat most?"}},
}};

const std::array<std::string_view, 4> kBioDistractors = {
    "{N} is often mentioned in local news.", "Many colleagues remembered {N} fondly.",
    "{N} kept a large private library.", "Friends described {N} as a patient listener."};

struct KindTemplates {
  std::string_view passage;  // "{N}", "{V}", "{SPAN}"
  std::array<std::string_view, 4> queries;  // "{N}", "{EXPR}"
};

const KindTemplates& kind_templates(FactKind k) {
  static const std::array<KindTemplates, 4> table = {{
      {"{N} held the position of {V} {SPAN}.",
       {"Which position did {N} hold {EXPR}?", "What position did {N} hold {EXPR}?",
        "What role did {N} have {EXPR}?", "{N} held which position {EXPR}?"}},
      {"{N} played for the {V} {SPAN}.",
       {"Which team did {N} play for {EXPR}?", "{N} played for which team {EXPR}?",
        "What team did {N} play for {EXPR}?", "For which team did {N} play {EXPR}?"}},
      {"{N} worked at {V} {SPAN}.",
       {"Which organization did {N} work for {EXPR}?", "Where did {N} work {EXPR}?",
        "Who employed {N} {EXPR}?", "{N} worked for which organization {EXPR}?"}},
      {"{N} lived in {V} {SPAN}.",
       {"Where did {N} live {EXPR}?", "Which city was home to {N} {EXPR}?",
        "In which city did {N} live {EXPR}?", "{N} lived in which city {EXPR}?"}},
  }};
  return table[static_cast<std::size_t>(k)];
}

std::string fill(std::string_view tmpl, std::string_view key, std::string_view value) {
  std::string out(tmpl);
  for (std::size_t pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
    out.replace(pos, key.size(), value);
  return out;
}

std::string render_span(const FactInterval& iv, Rng& rng) {
  const int a = iv.start.year;
  const int b = iv.end.year;
  if (a == b) return "in " + std::to_string(a);
  if (coin(rng, 0.5)) return "from " + std::to_string(a) + " until " + std::to_string(b);
  return "from " + std::to_string(a) + " to " + std::to_string(b);
}

// Disjoint chronological intervals tiling part of [min_year, max_year].
std::vector<FactInterval> make_timeline(const CorpusConfig& cfg, Rng& rng) {
  const int f = cfg.facts_per_entity;
  const int span = cfg.max_year - cfg.min_year + 1;
  const int extra = span - f;
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(static_cast<std::size_t>(2 * f + 1));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = expo(rng) * (i % 2 == 0 ? 0.5 : 1.0);
  double total = 0;
  for (double x : w) total += x;
  std::vector<int> alloc(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    alloc[i] = static_cast<int>(std::floor(extra * w[i] / total));
  // even slots are gaps, odd slots are durations beyond the first year
  std::vector<FactInterval> out;
  int year = cfg.min_year + alloc[0];
  for (int i = 0; i < f; ++i) {
    const int len = 1 + alloc[static_cast<std::size_t>(2 * i + 1)];
    FactInterval iv{{year, std::nullopt}, {year + len - 1, std::nullopt}};
    out.push_back(iv);
    year += len + alloc[static_cast<std::size_t>(2 * i + 2)];
  }
  return out;
}

std::optional<int> maybe_month(Rng& rng) {
  if (coin(rng, 0.3)) return uniform_int(rng, 1, 12);
  return std::nullopt;
}

// Proposes a constraint of the given specifier aimed at one fact of the entity.
// The caller verifies uniqueness with resolve_gold.
std::optional<TimeConstraint> propose(const Entity& e, Specifier s, Rng& rng) {
  const auto& facts = e.facts;
  const int n = static_cast<int>(facts.size());
  const auto& fact = facts[static_cast<std::size_t>(uniform_int(rng, 0, n - 1))];
  const int a = fact.interval.start.year;
  const int b = fact.interval.end.year;
  switch (s) {
    case Specifier::In:
      return TimeConstraint{s, {uniform_int(rng, a, b), maybe_month(rng)}, std::nullopt};
    case Specifier::FromTo:
    case Specifier::Between: {
      if (b == a) return std::nullopt;
      int y1 = uniform_int(rng, a, b - 1);
      int y2 = uniform_int(rng, y1 + 1, b);
      if (coin(rng, 0.3)) return TimeConstraint{s, {y1, uniform_int(rng, 1, 12)}, TimePoint{y2, uniform_int(rng, 1, 12)}};
      return TimeConstraint{s, {y1, std::nullopt}, TimePoint{y2, std::nullopt}};
    }
    case Specifier::After: {
      const auto& last = facts.back().interval;
      const int lo = n > 1 ? facts[static_cast<std::size_t>(n - 2)].interval.end.year : last.start.year - 1;
      const int hi = last.end.year - 1;
      if (hi < lo) return std::nullopt;
      return TimeConstraint{s, {uniform_int(rng, lo, hi), maybe_month(rng)}, std::nullopt};
    }
    case Specifier::Before: {
      const auto& first = facts.front().interval;
      const int lo = first.start.year + 1;
      const int hi = n > 1 ? facts[1].interval.start.year : first.end.year + 1;
      if (hi < lo) return std::nullopt;
      return TimeConstraint{s, {uniform_int(rng, lo, hi), maybe_month(rng)}, std::nullopt};
    }
    case Specifier::InEarly:
    case Specifier::InLate: {
      const int y = uniform_int(rng, a, b);
      return TimeConstraint{s, {y - ((y % 10) + 10) % 10, std::nullopt}, std::nullopt};
    }
  }
  return std::nullopt;
}

const TimelineFact* find_fact(const Entity& e, const std::string& passage_id) {
  for (const auto& f : e.facts)
    if (f.passage_id == passage_id) return &f;
  return nullptr;
}

// One temporal query for specifier s, or nullopt after exhausting attempts.
std::optional<QueryRecord> make_temporal_query(const World& world, Specifier s, Split split, Rng& rng,
                                               std::set<std::string>& taken) {
  const int ne = static_cast<int>(world.entities.size());
  for (int attempt = 0; attempt < 4000; ++attempt) {
    const Entity& e = world.entities[static_cast<std::size_t>(uniform_int(rng, 0, ne - 1))];
    auto c = propose(e, s, rng);
    if (!c) continue;
    auto gold = resolve_gold(e, *c);
    if (gold.size() != 1) continue;
    const TimelineFact* fact = find_fact(e, gold.front());
    const auto& kt = kind_templates(fact->kind);
    std::string expr = timeparse::render_expression(*c);
    const bool decade = c->specifier == Specifier::InEarly || c->specifier == Specifier::InLate;
    if (decade && coin(rng, 0.5)) expr.insert(3, "the ");  // "in the early 1990s"
    const auto tmpl = kt.queries[static_cast<std::size_t>(uniform_int(rng, 0, kt.queries.size() - 1))];
    std::string text = fill(fill(tmpl, "{N}", e.name), "{EXPR}", expr);
    if (taken.count(text)) continue;
    taken.insert(text);
    QueryRecord q;
    q.text = std::move(text);
    q.constraint = *c;
    q.gold_passage_ids = std::move(gold);
    q.split = split;
    return q;
  }
  return std::nullopt;
}

int scaled(int count, double scale) { return std::max(1, static_cast<int>(std::lround(count * scale))); }

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_name(std::string_view name) {
  for (auto s : {Split::Train, Split::Dev, Split::Test})
    if (split_name(s) == name) return s;
  return std::nullopt;
}

void CorpusConfig::validate() const {
  if (entity_count < 1 || facts_per_entity < 1 || bio_facts_per_entity < 1 || queries_per_specifier < 1 ||
      nontemporal_query_count < 1 || chunk_size < 1 || nontemporal_train_count < 1 || nontemporal_dev_count < 1)
    throw Error("corpus config: all counts must be >= 1");
  if (min_year >= max_year) throw Error("corpus config: min_year must be < max_year");
  if (bio_facts_per_entity > static_cast<int>(kBio.size()))
    throw Error("corpus config: bio_facts_per_entity exceeds " + std::to_string(kBio.size()));
  if (max_year - min_year + 1 < facts_per_entity)
    throw Error("corpus config: year range " + std::to_string(min_year) + "-" + std::to_string(max_year) +
                " is too narrow for " + std::to_string(facts_per_entity) + " disjoint facts");
  if (!(split_scale > 0)) throw Error("corpus config: split_scale must be > 0");
}

SplitCounts original_counts(Specifier s) {
  switch (s) {
    case Specifier::FromTo: return {11676, 2486};
    case Specifier::In: return {5759, 1233};
    case Specifier::Between: return {4888, 1054};
    case Specifier::After: return {903, 201};
    case Specifier::Before: return {973, 181};
    case Specifier::InEarly: return {309, 82};
    case Specifier::InLate: return {473, 91};
  }
  return {};
}

SplitCounts augmented_counts(Specifier s) {
  switch (s) {
    case Specifier::After: return {2741, 587};
    case Specifier::Before: return {2867, 609};
    case Specifier::InEarly: return {1885, 438};
    case Specifier::InLate: return {2392, 474};
    default: return original_counts(s);
  }
}

std::vector<std::string> resolve_gold(const Entity& entity, const TimeConstraint& c) {
  std::vector<std::string> gold;
  for (const auto& f : entity.facts)
    if (timeparse::constraint_satisfied(c, f.interval)) gold.push_back(f.passage_id);
  return gold;
}

std::vector<Passage> chunk_document(std::string_view text, int chunk_size, std::string_view doc_id) {
  if (chunk_size < 1) throw Error("chunk_size must be >= 1");
  const auto words = split_words(text);
  std::vector<Passage> out;
  const auto size = static_cast<std::size_t>(chunk_size);
  for (std::size_t i = 0; i < words.size(); i += size) {
    Passage p;
    p.doc_id = std::string(doc_id);
    p.passage_id = p.doc_id + "#" + std::to_string(out.size());
    const std::size_t end = std::min(words.size(), i + size);
    for (std::size_t j = i; j < end; ++j) {
      if (j > i) p.text.push_back(' ');
      p.text.append(words[j]);
    }
    p.word_count = static_cast<int>(end - i);
    out.push_back(std::move(p));
  }
  return out;
}

SpecifierGroup sample_by_specifier(const std::vector<QueryRecord>& queries, Specifier s) {
  SpecifierGroup g{s, {}};
  for (const auto& q : queries)
    if (q.specifier() == s) g.queries.push_back(q);
  return g;
}

std::vector<QueryRecord> nontemporal_queries(const std::vector<QueryRecord>& queries) {
  std::vector<QueryRecord> out;
  for (const auto& q : queries)
    if (!q.temporal()) out.push_back(q);
  return out;
}

std::vector<QueryRecord> filter_split(const std::vector<QueryRecord>& queries, Split split) {
  std::vector<QueryRecord> out;
  for (const auto& q : queries)
    if (q.split == split) out.push_back(q);
  return out;
}

std::vector<SpecifierGroup> balance_augment(const World& world, std::vector<SpecifierGroup> groups,
                                            const std::map<Specifier, int>& targets, Split split,
                                            std::uint64_t seed, std::set<std::string>& taken) {
  if (world.entities.empty()) throw Error("augmentation needs a non-empty world");
  for (auto& g : groups) {
    auto it = targets.find(g.specifier);
    if (it == targets.end() || static_cast<int>(g.queries.size()) >= it->second) continue;
    Rng rng = stream(seed, std::string("augment/") + std::string(split_name(split)) + "/" +
                               std::string(timeparse::specifier_name(g.specifier)));
    int n = 0;
    while (static_cast<int>(g.queries.size()) < it->second) {
      auto q = make_temporal_query(world, g.specifier, split, rng, taken);
      if (!q)
        throw Error("augmentation cannot produce further '" +
                    std::string(timeparse::specifier_name(g.specifier)) + "' queries");
      q->query_id = "aug-" + std::string(split_name(split)) + "-" +
                    std::string(timeparse::specifier_name(g.specifier)) + "-" + std::to_string(n++);
      g.queries.push_back(std::move(*q));
    }
  }
  return groups;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  World& world = corpus.world;

  Rng wrng = stream(cfg.seed, "world");
  NameMaker names(wrng);
  const int first_pool = std::max(4, cfg.entity_count / 3);
  std::vector<std::string> first_names;
  for (int i = 0; i < first_pool; ++i) first_names.push_back(names.make());
  std::vector<std::string> places, countries, languages, parents, teams, orgs;
  for (int i = 0; i < 40; ++i) places.push_back(names.make());
  for (int i = 0; i < 16; ++i) countries.push_back(names.make() + "ia");
  for (int i = 0; i < 16; ++i) languages.push_back(names.make() + "ish");
  for (int i = 0; i < 80; ++i) parents.push_back(names.make());
  for (int i = 0; i < 30; ++i) teams.push_back(names.make() + " United");
  for (int i = 0; i < 30; ++i) orgs.push_back(names.make() + " Works");

  for (int ei = 0; ei < cfg.entity_count; ++ei) {
    Entity e;
    e.name = pick(wrng, first_names) + " " + names.make();
    for (const auto& iv : make_timeline(cfg, wrng)) {
      TimelineFact f;
      f.kind = static_cast<FactKind>(uniform_int(wrng, 0, 3));
      switch (f.kind) {
        case FactKind::Position: f.value = pick(wrng, kRoles); break;
        case FactKind::Team: f.value = pick(wrng, teams); break;
        case FactKind::Employer: f.value = pick(wrng, orgs); break;
        case FactKind::Residence: f.value = pick(wrng, places); break;
      }
      f.interval = iv;
      e.facts.push_back(std::move(f));
    }
    std::vector<int> attrs(kBio.size());
    for (std::size_t i = 0; i < attrs.size(); ++i) attrs[i] = static_cast<int>(i);
    std::shuffle(attrs.begin(), attrs.end(), wrng);
    attrs.resize(static_cast<std::size_t>(cfg.bio_facts_per_entity));
    std::sort(attrs.begin(), attrs.end());
    for (int a : attrs) {
      BioFact b;
      b.attribute = a;
      switch (a) {
        case 0: b.value = pick(wrng, places); break;
        case 1: b.value = pick(wrng, countries); break;
        case 2: b.value = pick(wrng, languages); break;
        case 3:
        case 4: b.value = pick(wrng, parents) + " " + e.name.substr(e.name.find(' ') + 1); break;
        case 5: b.value = pick(wrng, kInstruments); break;
        case 6: b.value = pick(wrng, kColors); break;
        default: b.value = pick(wrng, kDishes); break;
      }
      e.bio.push_back(std::move(b));
    }
    world.entities.push_back(std::move(e));
  }

  // Passages: one document per fact, one per biography attribute.
  Rng prng = stream(cfg.seed, "passages");
  int next_pid = 0;
  auto emit = [&](const std::string& doc_id, const std::string& text) {
    std::vector<std::string> ids;
    for (auto& p : chunk_document(text, cfg.chunk_size, doc_id)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "p%05d", next_pid++);
      p.passage_id = buf;
      ids.push_back(p.passage_id);
      corpus.passages.push_back(std::move(p));
    }
    return ids;
  };
  for (std::size_t ei = 0; ei < world.entities.size(); ++ei) {
    Entity& e = world.entities[ei];
    char eid[16];
    std::snprintf(eid, sizeof eid, "e%03zu", ei);
    for (std::size_t fi = 0; fi < e.facts.size(); ++fi) {
      auto& f = e.facts[fi];
      const auto& kt = kind_templates(f.kind);
      std::string text = fill(fill(fill(kt.passage, "{N}", e.name), "{V}", f.value), "{SPAN}",
                              render_span(f.interval, prng));
      auto ids = emit(std::string(eid) + "-f" + std::to_string(fi), text);
      // Fact sentences are far below any sensible chunk size; a split fact is
      // labelled by its first chunk.
      f.passage_id = ids.front();
    }
    for (auto& b : e.bio) {
      const auto& attr = kBio[static_cast<std::size_t>(b.attribute)];
      std::string text = fill(fill(attr.passage, "{N}", e.name), "{V}", b.value);
      text += " " + fill(kBioDistractors[static_cast<std::size_t>(uniform_int(prng, 0, 3))], "{N}", e.name);
      b.passage_id = emit(std::string(eid) + "-b" + std::string(attr.key), text).front();
    }
  }

  std::set<std::string> taken;
  std::vector<QueryRecord> temporal;

  auto fill_groups = [&](Split split, auto count_of) {
    Rng qrng = stream(cfg.seed, std::string("queries/") + std::string(split_name(split)));
    std::vector<SpecifierGroup> groups;
    for (auto s : timeparse::kAllSpecifiers) {
      SpecifierGroup g{s, {}};
      const int want = count_of(s);
      for (int i = 0; i < want; ++i) {
        auto q = make_temporal_query(world, s, split, qrng, taken);
        if (!q)
          throw Error("cannot generate '" + std::string(timeparse::specifier_name(s)) +
                      "' queries for split " + std::string(split_name(split)));
        g.queries.push_back(std::move(*q));
      }
      groups.push_back(std::move(g));
    }
    return groups;
  };

  auto test_groups = fill_groups(Split::Test, [&](Specifier) { return cfg.queries_per_specifier; });
  auto dev_groups = fill_groups(Split::Dev, [&](Specifier s) { return scaled(original_counts(s).dev, cfg.split_scale); });
  auto train_groups =
      fill_groups(Split::Train, [&](Specifier s) { return scaled(original_counts(s).train, cfg.split_scale); });
  if (cfg.augment) {
    std::map<Specifier, int> train_targets, dev_targets;
    for (auto s : timeparse::kAllSpecifiers) {
      train_targets[s] = scaled(augmented_counts(s).train, cfg.split_scale);
      dev_targets[s] = scaled(augmented_counts(s).dev, cfg.split_scale);
    }
    train_groups = balance_augment(world, std::move(train_groups), train_targets, Split::Train, cfg.seed, taken);
    dev_groups = balance_augment(world, std::move(dev_groups), dev_targets, Split::Dev, cfg.seed, taken);
  }

  // Non-temporal queries: every (entity, attribute, template) triple at most once.
  struct Triple {
    std::size_t entity;
    std::size_t bio;
    std::size_t tmpl;
  };
  std::vector<Triple> triples;
  for (std::size_t ei = 0; ei < world.entities.size(); ++ei)
    for (std::size_t bi = 0; bi < world.entities[ei].bio.size(); ++bi)
      for (std::size_t t = 0; t < 3; ++t) triples.push_back({ei, bi, t});
  Rng nrng = stream(cfg.seed, "queries/nontemporal");
  std::shuffle(triples.begin(), triples.end(), nrng);
  const std::size_t nt_needed = static_cast<std::size_t>(cfg.nontemporal_query_count + cfg.nontemporal_train_count +
                                                         cfg.nontemporal_dev_count);
  if (triples.size() < nt_needed)
    throw Error("world too small for " + std::to_string(nt_needed) + " non-temporal queries (capacity " +
                std::to_string(triples.size()) + ")");
  std::vector<QueryRecord> nt;
  for (std::size_t i = 0; i < nt_needed; ++i) {
    const auto& tr = triples[i];
    const Entity& e = world.entities[tr.entity];
    const BioFact& b = e.bio[tr.bio];
    QueryRecord q;
    q.text = fill(kBio[static_cast<std::size_t>(b.attribute)].queries[tr.tmpl], "{N}", e.name);
    q.gold_passage_ids = {b.passage_id};
    const auto n_test = static_cast<std::size_t>(cfg.nontemporal_query_count);
    const auto n_train = static_cast<std::size_t>(cfg.nontemporal_train_count);
    q.split = i < n_test ? Split::Test : (i < n_test + n_train ? Split::Train : Split::Dev);
    nt.push_back(std::move(q));
  }

  // Final order: train, dev, test; specifiers in table order, non-temporal last.
  int next_qid = 0;
  auto append = [&](QueryRecord q) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%06d", next_qid++);
    q.query_id = buf;
    corpus.queries.push_back(std::move(q));
  };
  const std::array<std::pair<Split, std::vector<SpecifierGroup>*>, 3> ordered = {
      {{Split::Train, &train_groups}, {Split::Dev, &dev_groups}, {Split::Test, &test_groups}}};
  for (auto [split, groups] : ordered) {
    for (auto& g : *groups)
      for (auto& q : g.queries) append(std::move(q));
    for (const auto& q : nt)
      if (q.split == split) append(q);
  }
  return corpus;
}

}  // namespace tempmerge::corpus
