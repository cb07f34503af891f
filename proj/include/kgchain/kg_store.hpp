#pragma once

#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgchain {

/// Text that may name an entity or relation: non-empty, no surrounding
/// whitespace, no tab or newline characters.
bool is_valid_name(std::string_view text) noexcept;

class EntityId {
 public:
  explicit EntityId(std::string value);

  static bool is_valid(std::string_view text) noexcept { return is_valid_name(text); }

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const EntityId&, const EntityId&) = default;
  friend bool operator==(const EntityId&, const EntityId&) = default;

 private:
  std::string value_;
};

class RelationName {
 public:
  explicit RelationName(std::string value);

  static bool is_valid(std::string_view text) noexcept { return is_valid_name(text); }

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const RelationName&, const RelationName&) = default;
  friend bool operator==(const RelationName&, const RelationName&) = default;

 private:
  std::string value_;
};

struct Triple {
  EntityId subject;
  RelationName relation;
  EntityId object;

  friend auto operator<=>(const Triple&, const Triple&) = default;
  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Convenience for tests and fixtures; throws on invalid names.
Triple make_triple(std::string subject, std::string relation, std::string object);

/// Renders `s | r | o`, the evidence line format used in prompts.
std::string to_evidence_line(const Triple& triple);

using EntitySet = std::set<EntityId>;
using TripleSet = std::set<Triple>;

struct Traversal {
  EntitySet entities;
  TripleSet evidence;

  friend bool operator==(const Traversal&, const Traversal&) = default;
};

enum class GraphFormat { tsv, triples_jsonl };

struct GraphLoadError : std::runtime_error {
  GraphLoadError(std::size_t line, std::string content, const std::string& reason);

  std::size_t line;  // 1-based
  std::string content;
};

/// Immutable triple store. Indices are rebuilt from the triple set on
/// construction and never mutated afterwards, so concurrent reads are safe.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(std::vector<Triple> triples);

  const TripleSet& triples() const noexcept { return triples_; }
  const EntitySet& entities() const noexcept { return entities_; }
  const std::set<RelationName>& relations() const noexcept { return relations_; }

  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  bool has_entity(const EntityId& entity) const { return entities_.contains(entity); }
  bool has_relation(const RelationName& relation) const { return relations_.contains(relation); }

  bool contains(const Triple& triple) const { return triples_.contains(triple); }

  /// Objects reachable from any source over `relation`, with the matched triples.
  Traversal follow(const EntitySet& sources, const RelationName& relation) const;

  /// Subjects that reach any sink over `relation`, with the matched triples.
  Traversal follow_inverse(const EntitySet& sinks, const RelationName& relation) const;

  /// Triples within `hops` undirected steps of `center`. Throws
  /// std::invalid_argument when hops is zero.
  TripleSet neighborhood(const EntityId& center, std::size_t hops) const;

  /// First `limit` relation names in lexicographic order.
  std::vector<RelationName> relation_sample(std::size_t limit) const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.triples_ == b.triples_;
  }

 private:
  using Key = std::pair<std::string, std::string>;

  TripleSet triples_;
  EntitySet entities_;
  std::set<RelationName> relations_;
  std::map<Key, EntitySet> forward_;
  std::map<Key, EntitySet> inverse_;
  std::map<EntityId, std::vector<Triple>> incident_;
};

KnowledgeGraph load_graph(std::istream& source, GraphFormat format);
KnowledgeGraph load_graph_file(const std::string& path, GraphFormat format);

GraphFormat parse_graph_format(std::string_view name);

}  // namespace kgchain
