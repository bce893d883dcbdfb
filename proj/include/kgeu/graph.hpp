#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "kgeu/error.hpp"

namespace kgeu {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = (std::uint64_t{t.head} << 32) ^ (std::uint64_t{t.relation} << 16) ^ t.tail;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

/// Duplicate-free triple sequence with stable insertion order.
class TripleSet {
 public:
  TripleSet() = default;

  /// Keeps the first occurrence of every triple.
  explicit TripleSet(std::span<const Triple> triples) {
    order_.reserve(triples.size());
    members_.reserve(triples.size());
    for (const Triple& t : triples) insert(t);
  }
  TripleSet(std::initializer_list<Triple> triples)
      : TripleSet(std::span<const Triple>(triples.begin(), triples.size())) {}

  /// Returns false when the triple was already present.
  bool insert(const Triple& t) {
    if (!members_.insert(t).second) return false;
    order_.push_back(t);
    return true;
  }

  bool contains(const Triple& t) const { return members_.contains(t); }
  std::size_t size() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }

  auto begin() const noexcept { return order_.begin(); }
  auto end() const noexcept { return order_.end(); }
  const Triple& operator[](std::size_t i) const { return order_[i]; }
  std::span<const Triple> view() const noexcept { return order_; }

  /// Set equality, independent of order.
  bool same_members(const TripleSet& other) const {
    if (size() != other.size()) return false;
    return std::all_of(order_.begin(), order_.end(), [&](const Triple& t) { return other.contains(t); });
  }

 private:
  std::vector<Triple> order_;
  std::unordered_set<Triple, TripleHash> members_;
};

/// Dictionary-encoded graph with a one-hop incidence index. Immutable after
/// construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph(std::vector<std::string> entity_names, std::vector<std::string> relation_names,
                 std::span<const Triple> triples)
      : entity_names_(std::move(entity_names)),
        relation_names_(std::move(relation_names)),
        triples_(triples) {
    if (entity_names_.empty()) throw DomainError("knowledge graph has no entities");
    duplicates_ = triples.size() - triples_.size();
    entity_index_.reserve(entity_names_.size());
    for (std::size_t i = 0; i < entity_names_.size(); ++i) {
      if (!entity_index_.emplace(entity_names_[i], static_cast<EntityId>(i)).second) {
        throw DomainError("duplicate entity name '" + entity_names_[i] + "'");
      }
    }
    for (std::size_t i = 0; i < relation_names_.size(); ++i) {
      if (!relation_index_.emplace(relation_names_[i], static_cast<RelationId>(i)).second) {
        throw DomainError("duplicate relation name '" + relation_names_[i] + "'");
      }
    }
    incidence_.resize(entity_names_.size());
    for (std::size_t i = 0; i < triples_.size(); ++i) {
      const Triple& t = triples_[i];
      if (t.head >= num_entities() || t.tail >= num_entities() || t.relation >= num_relations()) {
        throw DomainError("triple references an id outside the dictionaries");
      }
      incidence_[t.head].push_back(static_cast<std::uint32_t>(i));
      // Self-loops are stored once.
      if (t.tail != t.head) incidence_[t.tail].push_back(static_cast<std::uint32_t>(i));
    }
  }

  std::size_t num_entities() const noexcept { return entity_names_.size(); }
  std::size_t num_relations() const noexcept { return relation_names_.size(); }
  std::size_t num_triples() const noexcept { return triples_.size(); }

  const TripleSet& triples() const noexcept { return triples_; }
  const std::vector<std::string>& entity_names() const noexcept { return entity_names_; }
  const std::vector<std::string>& relation_names() const noexcept { return relation_names_; }
  const std::string& entity_name(EntityId e) const { return entity_names_.at(e); }
  const std::string& relation_name(RelationId r) const { return relation_names_.at(r); }

  /// Number of input triples collapsed as duplicates at construction.
  std::size_t duplicates_collapsed() const noexcept { return duplicates_; }

  std::optional<EntityId> find_entity(std::string_view name) const {
    auto it = entity_index_.find(std::string(name));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<RelationId> find_relation(std::string_view name) const {
    auto it = relation_index_.find(std::string(name));
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
  }

  void check_entity(EntityId e) const {
    if (e >= num_entities()) {
      throw DomainError("entity id " + std::to_string(e) + " out of range (|E| = " +
                        std::to_string(num_entities()) + ")");
    }
  }

  void check_triple(const Triple& t) const {
    check_entity(t.head);
    check_entity(t.tail);
    if (t.relation >= num_relations()) {
      throw DomainError("relation id " + std::to_string(t.relation) + " out of range");
    }
  }

  /// Indices into triples() of the triples incident to e.
  std::span<const std::uint32_t> incident(EntityId e) const {
    check_entity(e);
    return incidence_[e];
  }

  std::size_t degree(EntityId e) const { return incident(e).size(); }

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  TripleSet triples_;
  std::size_t duplicates_ = 0;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<std::vector<std::uint32_t>> incidence_;
};

/// Triples with e as head or tail.
inline TripleSet boundary(const KnowledgeGraph& graph, EntityId e) {
  TripleSet out;
  for (std::uint32_t i : graph.incident(e)) out.insert(graph.triples()[i]);
  return out;
}

/// Endpoints of boundary(e), sorted. Contains e itself unless e is isolated.
inline std::vector<EntityId> boundary_entities(const KnowledgeGraph& graph, EntityId e) {
  std::vector<EntityId> out;
  for (std::uint32_t i : graph.incident(e)) {
    const Triple& t = graph.triples()[i];
    out.push_back(t.head);
    out.push_back(t.tail);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

/// Splits one TSV record into exactly three non-empty fields.
inline std::array<std::string_view, 3> split_record(std::string_view line, std::size_t line_no) {
  std::array<std::string_view, 3> fields;
  std::size_t start = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    const std::size_t tab = line.find('\t', start);
    const bool last = f == 2;
    if (last != (tab == std::string_view::npos)) {
      const std::size_t count = static_cast<std::size_t>(std::count(line.begin(), line.end(), '\t')) + 1;
      throw ParseError(line_no, "expected 3 tab-separated fields, found " + std::to_string(count));
    }
    fields[f] = line.substr(start, last ? std::string_view::npos : tab - start);
    if (fields[f].empty()) throw ParseError(line_no, "empty identifier in field " + std::to_string(f + 1));
    start = tab + 1;
  }
  return fields;
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    fn(split_record(line, line_no), line_no);
  }
}

}  // namespace detail

/// Reads `head<TAB>relation<TAB>tail` lines. Ids follow first occurrence;
/// duplicate lines collapse into one triple.
inline KnowledgeGraph parse_triples(std::istream& in) {
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::unordered_map<std::string, EntityId> entity_ids;
  std::unordered_map<std::string, RelationId> relation_ids;
  std::vector<Triple> triples;

  auto intern = [](auto& names, auto& ids, std::string_view name) {
    auto [it, fresh] = ids.try_emplace(std::string(name), static_cast<std::uint32_t>(names.size()));
    if (fresh) names.emplace_back(name);
    return it->second;
  };

  detail::for_each_record(in, [&](const std::array<std::string_view, 3>& f, std::size_t) {
    const EntityId h = intern(entities, entity_ids, f[0]);
    const RelationId r = intern(relations, relation_ids, f[1]);
    const EntityId t = intern(entities, entity_ids, f[2]);
    triples.push_back({h, r, t});
  });
  if (in.bad()) throw ParseError("stream read failure");
  if (triples.empty()) throw ParseError("empty input: no triples");

  KnowledgeGraph graph(std::move(entities), std::move(relations), triples);
  if (graph.duplicates_collapsed() > 0) {
    spdlog::info("collapsed {} duplicate triple lines", graph.duplicates_collapsed());
  }
  return graph;
}

/// Reads a TSV subset of an existing graph, resolving names through its
/// dictionaries. Unknown names are a parse error. Empty input is allowed.
inline TripleSet parse_triple_subset(std::istream& in, const KnowledgeGraph& graph) {
  TripleSet out;
  detail::for_each_record(in, [&](const std::array<std::string_view, 3>& f, std::size_t line_no) {
    auto h = graph.find_entity(f[0]);
    auto r = graph.find_relation(f[1]);
    auto t = graph.find_entity(f[2]);
    if (!h || !r || !t) throw ParseError(line_no, "identifier not present in the source graph");
    out.insert({*h, *r, *t});
  });
  if (in.bad()) throw ParseError("stream read failure");
  return out;
}

inline void write_triples(std::ostream& out, const KnowledgeGraph& graph, std::span<const Triple> triples) {
  for (const Triple& t : triples) {
    out << graph.entity_names()[t.head] << '\t' << graph.relation_names()[t.relation] << '\t'
        << graph.entity_names()[t.tail] << '\n';
  }
}

}  // namespace kgeu
