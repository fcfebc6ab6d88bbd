#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgagent {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const Triple&) const = default;
};

/// Gold answers: one alias set per distinct answer.
using GoldAnswers = std::vector<std::vector<std::string>>;

struct QAExample {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
  GoldAnswers answers;
  std::vector<Triple> critical_triples;
  /// Recorded plan-language program, consumed by the scripted oracle policy.
  std::string plan;
};

std::vector<QAExample> load_qa(const std::filesystem::path& path);

/// entity id -> surface aliases, in file order
using AliasMap = std::map<std::string, std::vector<std::string>>;

AliasMap load_aliases(const std::filesystem::path& path);

/// Immutable indexed triple store. Safe to share across threads once built.
class KnowledgeGraph {
 public:
  using HeadIndex = std::map<std::string, std::set<std::string>, std::less<>>;
  using PairIndex = std::map<std::pair<std::string, std::string>, std::set<std::string>>;

  KnowledgeGraph() = default;

  /// Builds indices from `triples` (duplicates collapse). Entities named in
  /// `aliases` keep those aliases ahead of the derived id text.
  static KnowledgeGraph build(std::vector<Triple> triples, const AliasMap& aliases = {});

  const std::set<Triple>& triples() const { return triples_; }
  size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  bool contains(const Triple& t) const { return triples_.count(t) != 0; }

  const HeadIndex& head_index() const { return head_index_; }
  const PairIndex& pair_index() const { return pair_index_; }
  const std::set<std::string>& relation_vocabulary() const { return relations_; }

  /// Relations leaving `entity`; empty when the entity has no outgoing triple.
  const std::set<std::string>& relations_of(std::string_view entity) const;
  const std::set<std::string>& tails(std::string_view entity, std::string_view relation) const;

  bool has_entity(std::string_view entity) const;
  /// Aliases in display order; always non-empty for a known entity id.
  std::vector<std::string> aliases(std::string_view entity) const;
  std::string display_name(std::string_view entity) const;
  /// Entity ids whose id or any alias matches `text` after normalization
  /// (underscores read as spaces).
  std::vector<std::string> resolve(std::string_view text) const;

  /// Rebuild-and-compare check of the head index, pair index and vocabulary.
  bool indices_consistent() const;

  /// Copy of this graph with `removed` dropped (alias table carried over).
  KnowledgeGraph without(const std::set<Triple>& removed) const;

 private:
  std::set<Triple> triples_;
  HeadIndex head_index_;
  PairIndex pair_index_;
  std::set<std::string> relations_;
  std::map<std::string, std::vector<std::string>, std::less<>> aliases_;
  std::map<std::string, std::vector<std::string>, std::less<>> alias_lookup_;
  AliasMap source_aliases_;
};

KnowledgeGraph load_triples(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& alias_path = std::nullopt);

void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg);

// ---------------------------------------------------------------------------
// Relation search

/// Similarity between a hypothesised relation text and a stored relation name.
class RelationSimilarity {
 public:
  virtual ~RelationSimilarity() = default;
  virtual double score(std::string_view hypothesis, std::string_view relation) const = 0;
};

/// Jaccard overlap of lowercase word tokens (relation names split on '.', '_', ' ').
class TokenJaccardSimilarity final : public RelationSimilarity {
 public:
  double score(std::string_view hypothesis, std::string_view relation) const override;
};

inline constexpr int kDefaultRelationTopK = 15;

/// Orders `candidates` by similarity (desc), then edit distance to the
/// lowercase hypothesis (asc), then name; keeps at most k.
std::vector<std::string> rank_relations(const std::set<std::string>& candidates,
                                        std::string_view hypothesis, int k,
                                        const RelationSimilarity& similarity);

std::vector<std::string> relation_search(const KnowledgeGraph& kg, std::string_view entity,
                                         std::string_view hypothesis, int k = kDefaultRelationTopK);
std::vector<std::string> relation_search(const KnowledgeGraph& kg, std::string_view entity,
                                         std::string_view hypothesis, int k,
                                         const RelationSimilarity& similarity);

// ---------------------------------------------------------------------------
// Neighbor search

inline constexpr std::string_view kKgSentinel = "No information in KG, please use web tool.";

/// Accepts both phrasings of the miss sentinel seen in foreign trajectories.
bool is_kg_sentinel(std::string_view text);

struct NeighborAnswer {
  std::vector<std::string> tails;  // entity ids
  std::vector<std::string> texts;  // display aliases, same order

  bool hit() const { return !tails.empty(); }
  /// "; "-joined tail texts, or the sentinel on a miss.
  std::string render() const;
};

NeighborAnswer neighbor_search(const KnowledgeGraph& kg, std::string_view entity,
                               std::string_view relation);

// ---------------------------------------------------------------------------
// Incomplete-graph sampling

enum class Coverage { CKG, IKG };

std::string_view to_string(Coverage c);
Coverage parse_coverage(std::string_view text);

struct RemovalEntry {
  std::string id;
  std::vector<Triple> removed;  // selected critical triples
  Coverage coverage = Coverage::CKG;
};

struct RemovalLog {
  double fraction = 0.0;
  uint64_t seed = 0;
  std::vector<RemovalEntry> entries;  // QA file order

  const RemovalEntry* find(std::string_view id) const;
  std::optional<Coverage> coverage_of(std::string_view id) const;
};

struct IkgSample {
  KnowledgeGraph graph;
  RemovalLog log;
};

/// Number of critical triples removed for a question with `n` of them.
size_t removal_count(double fraction, size_t n);

/// Per question, removes ceil(fraction * |critical|) seeded-random critical
/// triples plus every triple linking the same entity pair in either direction.
IkgSample sample_ikg(const KnowledgeGraph& kg, const std::vector<QAExample>& qa, double fraction,
                     uint64_t seed);

/// Re-derives the incomplete graph recorded in `log` from its source graph.
KnowledgeGraph apply_removal_log(const KnowledgeGraph& kg, const RemovalLog& log);

void save_removal_log(const std::filesystem::path& path, const RemovalLog& log);
RemovalLog load_removal_log(const std::filesystem::path& path);

}  // namespace kgagent
