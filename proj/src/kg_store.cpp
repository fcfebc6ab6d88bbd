#include "kgagent/kg_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <tuple>

#include "kgagent/error.hpp"
#include "kgagent/jsonl.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

namespace {

const std::set<std::string> kEmptySet;

Triple triple_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw LoadError("triple must be a [head, relation, tail] array");
  return Triple{j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

json triple_to_json(const Triple& t) { return json::array({t.head, t.relation, t.tail}); }

std::pair<std::string, std::string> unordered_pair(const std::string& a, const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

// ---------------------------------------------------------------------------
// QA and alias files

std::vector<QAExample> load_qa(const std::filesystem::path& path) {
  std::vector<QAExample> out;
  size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      QAExample q;
      q.id = j.at("id").get<std::string>();
      q.question = j.at("question").get<std::string>();
      q.topic_entities = j.value("topic_entities", std::vector<std::string>{});
      q.answers = j.value("answers", GoldAnswers{});
      for (const auto& t : j.value("critical_triples", json::array())) {
        q.critical_triples.push_back(triple_from_json(t));
      }
      q.plan = j.value("plan", std::string{});
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ": bad QA record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

AliasMap load_aliases(const std::filesystem::path& path) {
  AliasMap out;
  for (const auto& j : read_jsonl(path)) {
    try {
      auto& list = out[j.at("entity").get<std::string>()];
      for (const auto& a : j.at("aliases")) list.push_back(a.get<std::string>());
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ": bad alias record: " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

KnowledgeGraph KnowledgeGraph::build(std::vector<Triple> triples, const AliasMap& aliases) {
  KnowledgeGraph kg;
  kg.source_aliases_ = aliases;
  std::set<std::string> entities;
  for (auto& t : triples) {
    kg.head_index_[t.head].insert(t.relation);
    kg.pair_index_[{t.head, t.relation}].insert(t.tail);
    kg.relations_.insert(t.relation);
    entities.insert(t.head);
    entities.insert(t.tail);
    kg.triples_.insert(std::move(t));
  }
  for (const auto& [id, _] : aliases) entities.insert(id);

  for (const auto& id : entities) {
    std::vector<std::string> list;
    std::set<std::string> seen;
    auto add = [&](const std::string& a) {
      std::string key = normalize(a);
      if (key.empty() || !seen.insert(key).second) return;
      list.push_back(a);
    };
    if (auto it = aliases.find(id); it != aliases.end()) {
      for (const auto& a : it->second) add(a);
    }
    add(id_to_text(id));
    for (const auto& a : list) kg.alias_lookup_[normalize(a)].push_back(id);
    kg.aliases_.emplace(id, std::move(list));
  }
  for (auto& [_, ids] : kg.alias_lookup_) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return kg;
}

const std::set<std::string>& KnowledgeGraph::relations_of(std::string_view entity) const {
  auto it = head_index_.find(entity);
  return it == head_index_.end() ? kEmptySet : it->second;
}

const std::set<std::string>& KnowledgeGraph::tails(std::string_view entity,
                                                   std::string_view relation) const {
  auto it = pair_index_.find({std::string(entity), std::string(relation)});
  return it == pair_index_.end() ? kEmptySet : it->second;
}

bool KnowledgeGraph::has_entity(std::string_view entity) const {
  if (head_index_.count(entity) != 0) return true;
  for (const auto& t : triples_) {
    if (t.tail == entity) return true;
  }
  return false;
}

std::vector<std::string> KnowledgeGraph::aliases(std::string_view entity) const {
  if (auto it = aliases_.find(entity); it != aliases_.end()) return it->second;
  return {id_to_text(entity)};
}

std::string KnowledgeGraph::display_name(std::string_view entity) const {
  return aliases(entity).front();
}

std::vector<std::string> KnowledgeGraph::resolve(std::string_view text) const {
  std::string raw = trim(text);
  if (aliases_.count(raw) != 0) return {raw};
  auto it = alias_lookup_.find(normalize(raw));
  // Policies often echo ids with underscores ("iranian_rial").
  if (it == alias_lookup_.end()) it = alias_lookup_.find(normalize(id_to_text(raw)));
  if (it == alias_lookup_.end()) return {};
  return it->second;
}

bool KnowledgeGraph::indices_consistent() const {
  KnowledgeGraph rebuilt = build({triples_.begin(), triples_.end()}, source_aliases_);
  if (rebuilt.head_index_ != head_index_ || rebuilt.pair_index_ != pair_index_ ||
      rebuilt.relations_ != relations_) {
    return false;
  }
  for (const auto& [_, rels] : head_index_) {
    for (const auto& r : rels) {
      if (relations_.count(r) == 0) return false;
    }
  }
  return true;
}

KnowledgeGraph KnowledgeGraph::without(const std::set<Triple>& removed) const {
  std::vector<Triple> kept;
  kept.reserve(triples_.size());
  for (const auto& t : triples_) {
    if (removed.count(t) == 0) kept.push_back(t);
  }
  return build(std::move(kept), source_aliases_);
}

KnowledgeGraph load_triples(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& alias_path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<Triple> triples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3 || normalize(cols[0]).empty() || normalize(cols[1]).empty()) {
      throw LoadError("malformed triple at line " + std::to_string(line_no));
    }
    triples.push_back(Triple{trim(cols[0]), trim(cols[1]), trim(cols[2])});
  }
  if (triples.empty()) throw LoadError("empty knowledge graph: " + path.string());
  AliasMap aliases;
  if (alias_path) aliases = load_aliases(*alias_path);
  return KnowledgeGraph::build(std::move(triples), aliases);
}

void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& t : kg.triples()) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

// ---------------------------------------------------------------------------
// Relation search

double TokenJaccardSimilarity::score(std::string_view hypothesis, std::string_view relation) const {
  auto a = word_tokens(hypothesis);
  auto b = word_tokens(relation);
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  size_t shared = 0;
  for (const auto& t : sa) shared += sb.count(t);
  size_t uni = sa.size() + sb.size() - shared;
  return static_cast<double>(shared) / static_cast<double>(uni);
}

std::vector<std::string> rank_relations(const std::set<std::string>& candidates,
                                        std::string_view hypothesis, int k,
                                        const RelationSimilarity& similarity) {
  struct Scored {
    double score;
    size_t distance;
    const std::string* name;
  };
  std::string hyp = to_lower(trim(hypothesis));
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const auto& r : candidates) {
    scored.push_back({similarity.score(hyp, r), edit_distance(hyp, to_lower(r)), &r});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.distance != b.distance) return a.distance < b.distance;
    return *a.name < *b.name;
  });
  std::vector<std::string> out;
  for (const auto& s : scored) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(*s.name);
  }
  return out;
}

std::vector<std::string> relation_search(const KnowledgeGraph& kg, std::string_view entity,
                                         std::string_view hypothesis, int k) {
  return relation_search(kg, entity, hypothesis, k, TokenJaccardSimilarity{});
}

std::vector<std::string> relation_search(const KnowledgeGraph& kg, std::string_view entity,
                                         std::string_view hypothesis, int k,
                                         const RelationSimilarity& similarity) {
  if (k < 1) return {};
  return rank_relations(kg.relations_of(entity), hypothesis, k, similarity);
}

// ---------------------------------------------------------------------------
// Neighbor search

bool is_kg_sentinel(std::string_view text) {
  std::string n = normalize(text);
  return n == "no information in kg, please use web tool" ||
         n == "no information in the kg, please use web tool";
}

std::string NeighborAnswer::render() const {
  return hit() ? join(texts, "; ") : std::string(kKgSentinel);
}

NeighborAnswer neighbor_search(const KnowledgeGraph& kg, std::string_view entity,
                               std::string_view relation) {
  NeighborAnswer out;
  for (const auto& t : kg.tails(entity, relation)) {
    out.tails.push_back(t);
    out.texts.push_back(kg.display_name(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Incomplete-graph sampling

std::string_view to_string(Coverage c) { return c == Coverage::CKG ? "CKG" : "IKG"; }

Coverage parse_coverage(std::string_view text) {
  if (text == "CKG") return Coverage::CKG;
  if (text == "IKG") return Coverage::IKG;
  throw LoadError("unknown coverage label: " + std::string(text));
}

const RemovalEntry* RemovalLog::find(std::string_view id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::optional<Coverage> RemovalLog::coverage_of(std::string_view id) const {
  if (const auto* e = find(id)) return e->coverage;
  return std::nullopt;
}

size_t removal_count(double fraction, size_t n) {
  if (n == 0 || fraction <= 0.0) return 0;
  // The epsilon keeps products such as 0.6 * 5 from rounding up past an integer.
  double want = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<size_t>(std::max(0.0, want)));
}

namespace {

std::set<Triple> purge_set(const KnowledgeGraph& kg, const std::vector<Triple>& seeds) {
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& t : seeds) pairs.insert(unordered_pair(t.head, t.tail));
  std::set<Triple> out;
  for (const auto& t : kg.triples()) {
    if (pairs.count(unordered_pair(t.head, t.tail)) != 0) out.insert(t);
  }
  return out;
}

}  // namespace

IkgSample sample_ikg(const KnowledgeGraph& kg, const std::vector<QAExample>& qa, double fraction,
                     uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error("removal fraction must lie in [0, 1]");
  }
  for (const auto& q : qa) {
    for (const auto& t : q.critical_triples) {
      if (!kg.contains(t)) {
        throw Error("question " + q.id + ": critical triple (" + t.head + ", " + t.relation +
                    ", " + t.tail + ") not in graph");
      }
    }
  }

  std::mt19937_64 rng(seed);
  IkgSample out;
  out.log.fraction = fraction;
  out.log.seed = seed;
  std::vector<Triple> all_selected;
  for (const auto& q : qa) {
    std::vector<Triple> critical;
    std::set<Triple> seen;
    for (const auto& t : q.critical_triples) {
      if (seen.insert(t).second) critical.push_back(t);
    }
    size_t count = removal_count(fraction, critical.size());
    // Partial Fisher-Yates; modulo draw keeps the stream identical across stdlibs.
    std::vector<size_t> idx(critical.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (size_t i = 0; i < count; ++i) {
      size_t j = i + static_cast<size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));

    RemovalEntry entry;
    entry.id = q.id;
    for (size_t i = 0; i < count; ++i) entry.removed.push_back(critical[idx[i]]);
    entry.coverage = entry.removed.empty() ? Coverage::CKG : Coverage::IKG;
    all_selected.insert(all_selected.end(), entry.removed.begin(), entry.removed.end());
    out.log.entries.push_back(std::move(entry));
  }
  out.graph = kg.without(purge_set(kg, all_selected));
  return out;
}

KnowledgeGraph apply_removal_log(const KnowledgeGraph& kg, const RemovalLog& log) {
  std::vector<Triple> seeds;
  for (const auto& e : log.entries) seeds.insert(seeds.end(), e.removed.begin(), e.removed.end());
  return kg.without(purge_set(kg, seeds));
}

void save_removal_log(const std::filesystem::path& path, const RemovalLog& log) {
  std::vector<json> records;
  for (const auto& e : log.entries) {
    json removed = json::array();
    for (const auto& t : e.removed) removed.push_back(triple_to_json(t));
    // Every line repeats the run parameters so any line reproduces the sample.
    records.push_back({{"id", e.id},
                       {"removed", removed},
                       {"coverage", to_string(e.coverage)},
                       {"fraction", log.fraction},
                       {"seed", log.seed}});
  }
  write_jsonl(path, records);
}

RemovalLog load_removal_log(const std::filesystem::path& path) {
  RemovalLog log;
  bool first = true;
  for (const auto& j : read_jsonl(path)) {
    try {
      // Hand-written logs may omit the run parameters.
      if (j.contains("fraction") || j.contains("seed")) {
        double fraction = j.value("fraction", log.fraction);
        uint64_t seed = j.value("seed", log.seed);
        if (!first && (fraction != log.fraction || seed != log.seed)) {
          throw LoadError(path.string() + ": records disagree on fraction or seed");
        }
        log.fraction = fraction;
        log.seed = seed;
      }
      first = false;
      RemovalEntry e;
      e.id = j.at("id").get<std::string>();
      for (const auto& t : j.at("removed")) e.removed.push_back(triple_from_json(t));
      e.coverage = parse_coverage(j.at("coverage").get<std::string>());
      if ((e.coverage == Coverage::IKG) != !e.removed.empty()) {
        throw LoadError("coverage label of " + e.id + " disagrees with its removals");
      }
      log.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw LoadError(path.string() + ": bad removal record: " + ex.what());
    }
  }
  return log;
}

}  // namespace kgagent
