#include <fstream>

#include "json.hpp"
#include "tempmerge/corpuslab.hpp"
#include "tempmerge/error.hpp"
#include "tempmerge/text.hpp"

namespace tempmerge::corpus {

using json = nlohmann::ordered_json;
using timeparse::TimePoint;

namespace {

json point_to_json(const TimePoint& t) {
  json j;
  j["year"] = t.year;
  if (t.month) j["month"] = *t.month;
  return j;
}

TimePoint point_from_json(const json& j) {
  TimePoint t;
  t.year = j.at("year").get<int>();
  if (j.contains("month") && !j.at("month").is_null()) t.month = j.at("month").get<int>();
  return t;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      f(line);
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::string passage_to_json(const Passage& p) {
  json j;
  j["passage_id"] = p.passage_id;
  j["doc_id"] = p.doc_id;
  j["text"] = p.text;
  return j.dump();
}

std::string query_to_json(const QueryRecord& q) {
  json j;
  j["query_id"] = q.query_id;
  j["text"] = q.text;
  if (q.constraint) {
    j["specifier"] = std::string(timeparse::specifier_name(q.constraint->specifier));
    json c;
    c["specifier"] = std::string(timeparse::specifier_name(q.constraint->specifier));
    c["t1"] = point_to_json(q.constraint->t1);
    if (q.constraint->t2) c["t2"] = point_to_json(*q.constraint->t2);
    j["constraint"] = c;
  } else {
    j["specifier"] = nullptr;
    j["constraint"] = nullptr;
  }
  j["gold_passage_ids"] = q.gold_passage_ids;
  j["split"] = std::string(split_name(q.split));
  return j.dump();
}

namespace {

QueryRecord query_from_json_unchecked(std::string_view line) {
  const json j = json::parse(line);
  QueryRecord q;
  q.query_id = j.at("query_id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  const bool has_spec = j.contains("specifier") && !j.at("specifier").is_null();
  const bool has_con = j.contains("constraint") && !j.at("constraint").is_null();
  if (has_spec != has_con) throw Error("query " + q.query_id + ": specifier and constraint must be set together");
  if (has_con) {
    const json& c = j.at("constraint");
    auto s = timeparse::specifier_from_name(c.at("specifier").get<std::string>());
    if (!s) throw Error("query " + q.query_id + ": unknown specifier");
    if (j.at("specifier").get<std::string>() != timeparse::specifier_name(*s))
      throw Error("query " + q.query_id + ": specifier disagrees with constraint");
    std::optional<TimePoint> t2;
    if (c.contains("t2")) t2 = point_from_json(c.at("t2"));
    q.constraint = timeparse::TimeConstraint::make(*s, point_from_json(c.at("t1")), t2);
  }
  q.gold_passage_ids = j.at("gold_passage_ids").get<std::vector<std::string>>();
  if (q.gold_passage_ids.empty()) throw Error("query " + q.query_id + ": empty gold_passage_ids");
  auto split = split_from_name(j.at("split").get<std::string>());
  if (!split) throw Error("query " + q.query_id + ": unknown split");
  q.split = *split;
  return q;
}

}  // namespace

QueryRecord query_from_json(std::string_view line) {
  try {
    return query_from_json_unchecked(line);
  } catch (const json::exception& e) {
    throw Error(std::string("bad query record: ") + e.what());
  }
}

void write_passages_jsonl(const std::filesystem::path& path, const std::vector<Passage>& passages) {
  auto out = open_out(path);
  for (const auto& p : passages) out << passage_to_json(p) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void write_queries_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& queries) {
  auto out = open_out(path);
  for (const auto& q : queries) out << query_to_json(q) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Passage> read_passages_jsonl(const std::filesystem::path& path) {
  std::vector<Passage> out;
  for_each_line(path, [&](const std::string& line) {
    const json j = json::parse(line);
    Passage p;
    p.passage_id = j.at("passage_id").get<std::string>();
    p.doc_id = j.at("doc_id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.word_count = static_cast<int>(split_words(p.text).size());
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<QueryRecord> read_queries_jsonl(const std::filesystem::path& path) {
  std::vector<QueryRecord> out;
  for_each_line(path, [&](const std::string& line) { out.push_back(query_from_json(line)); });
  return out;
}

}  // namespace tempmerge::corpus
