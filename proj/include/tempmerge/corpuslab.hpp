#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tempmerge/timeparse.hpp"

namespace tempmerge::corpus {

using timeparse::Specifier;
using timeparse::TimeConstraint;

struct Passage {
  std::string passage_id;
  std::string doc_id;
  std::string text;
  int word_count = 0;
};

enum class Split { Train, Dev, Test };
std::string_view split_name(Split s);
std::optional<Split> split_from_name(std::string_view name);

// A query; carries a constraint (and therefore a specifier) iff it is temporal.
struct QueryRecord {
  std::string query_id;
  std::string text;
  std::optional<TimeConstraint> constraint;
  std::vector<std::string> gold_passage_ids;
  Split split = Split::Train;

  std::optional<Specifier> specifier() const {
    if (constraint) return constraint->specifier;
    return std::nullopt;
  }
  bool temporal() const { return constraint.has_value(); }
};

struct CorpusConfig {
  int entity_count = 60;
  int facts_per_entity = 24;
  int bio_facts_per_entity = 8;
  int min_year = 1800;
  int max_year = 2020;
  // Test queries per specifier, and non-temporal test queries.
  int queries_per_specifier = 300;
  int nontemporal_query_count = 600;
  // Train/dev sizes are the TimeQA-style per-specifier counts scaled by this
  // factor; before augmentation the rarer specifiers are underrepresented.
  double split_scale = 0.05;
  bool augment = true;
  int nontemporal_train_count = 600;
  int nontemporal_dev_count = 100;
  int chunk_size = 100;
  std::uint64_t seed = 7;

  void validate() const;  // throws Error
};

// The hidden world the corpus is rendered from.
enum class FactKind { Position, Team, Employer, Residence };

struct TimelineFact {
  FactKind kind = FactKind::Position;
  std::string value;
  timeparse::FactInterval interval;
  std::string passage_id;
};

struct BioFact {
  int attribute = 0;  // index into the fixed attribute table
  std::string value;
  std::string passage_id;
};

struct Entity {
  std::string name;
  std::vector<TimelineFact> facts;  // chronological, pairwise disjoint
  std::vector<BioFact> bio;
};

struct World {
  std::vector<Entity> entities;
};

struct Corpus {
  std::vector<Passage> passages;
  std::vector<QueryRecord> queries;
  World world;
};

struct SpecifierGroup {
  Specifier specifier = Specifier::In;
  std::vector<QueryRecord> queries;
};

// Builds the synthetic world and renders passages and queries. Deterministic
// per config.seed. Throws Error when the year range cannot host
// facts_per_entity disjoint intervals or a quota cannot be met.
Corpus generate_corpus(const CorpusConfig& config);

// Splits text into chunks of chunk_size whitespace-delimited words. Chunks get
// ids "<doc_id>#<n>" unless the caller renames them.
std::vector<Passage> chunk_document(std::string_view text, int chunk_size, std::string_view doc_id = "doc");

SpecifierGroup sample_by_specifier(const std::vector<QueryRecord>& queries, Specifier s);
std::vector<QueryRecord> nontemporal_queries(const std::vector<QueryRecord>& queries);
std::vector<QueryRecord> filter_split(const std::vector<QueryRecord>& queries, Split split);

// Tops every group up to its target with fresh template instantiations over
// the world's timelines. Groups at or above target pass through unchanged.
// Query texts in `taken` (and the new ones) are never duplicated. Throws Error
// naming the specifier if its group cannot be filled.
std::vector<SpecifierGroup> balance_augment(const World& world, std::vector<SpecifierGroup> groups,
                                            const std::map<Specifier, int>& targets, Split split,
                                            std::uint64_t seed, std::set<std::string>& taken);

// Per-specifier training/dev counts before and after augmentation, in the
// proportions of the TimeQA statistics.
struct SplitCounts {
  int train = 0;
  int dev = 0;
};
SplitCounts original_counts(Specifier s);
SplitCounts augmented_counts(Specifier s);

// Gold passages of a constraint against an entity timeline (brute force).
std::vector<std::string> resolve_gold(const Entity& entity, const TimeConstraint& c);

// --- serialization (JSON lines, UTF-8, LF) ---
void write_passages_jsonl(const std::filesystem::path& path, const std::vector<Passage>& passages);
void write_queries_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& queries);
std::vector<Passage> read_passages_jsonl(const std::filesystem::path& path);
std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path);

std::string passage_to_json(const Passage& p);
std::string query_to_json(const QueryRecord& q);
QueryRecord query_from_json(std::string_view line);

}  // namespace tempmerge::corpus
