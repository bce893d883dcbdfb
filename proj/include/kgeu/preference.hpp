#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/random.hpp"

namespace kgeu {

enum class MaskDirection : std::uint8_t { head, tail };

/// A forgetting triple rewritten as (query, dis-preferred, preferred). For a
/// head-masked sample the query is (relation, tail); for tail-masked it is
/// (head, relation).
struct PreferenceSample {
  MaskDirection direction = MaskDirection::tail;
  RelationId relation = 0;
  EntityId kept = 0;
  EntityId dispreferred = 0;
  EntityId preferred = 0;

  /// The triple obtained by filling the masked slot with `e`.
  Triple complete(EntityId e) const {
    return direction == MaskDirection::head ? Triple{e, relation, kept} : Triple{kept, relation, e};
  }
  Triple dispreferred_triple() const { return complete(dispreferred); }
  Triple preferred_triple() const { return complete(preferred); }

  friend bool operator==(const PreferenceSample&, const PreferenceSample&) = default;
};

/// Query plus dis-preferred answer, before a preferred entity is attached.
struct MaskedQuery {
  MaskDirection direction = MaskDirection::tail;
  RelationId relation = 0;
  EntityId kept = 0;
  EntityId dispreferred = 0;

  Triple complete(EntityId e) const {
    return direction == MaskDirection::head ? Triple{e, relation, kept} : Triple{kept, relation, e};
  }
  PreferenceSample with_preferred(EntityId y) const { return {direction, relation, kept, dispreferred, y}; }
};

inline MaskedQuery mask_with(const Triple& t, MaskDirection direction) {
  if (direction == MaskDirection::head) return {direction, t.relation, t.tail, t.head};
  return {direction, t.relation, t.head, t.tail};
}

/// Bernoulli(0.5) choice of which entity of the triple becomes dis-preferred.
inline MaskedQuery mask_direction(const Triple& t, Rng& rng) {
  return mask_with(t, fair_coin(rng) ? MaskDirection::head : MaskDirection::tail);
}

enum class PreferredSampling : std::uint8_t { uniform, out_boundary };

struct SamplerConfig {
  PreferredSampling mode = PreferredSampling::out_boundary;
  std::uint64_t seed = 0;
};

/// Entities excluded from out-boundary draws for y_l: its boundary entities
/// with y_l itself adjoined. Sorted.
inline std::vector<EntityId> excluded_for(const KnowledgeGraph& graph, EntityId y_l) {
  std::vector<EntityId> out = boundary_entities(graph, y_l);
  auto it = std::lower_bound(out.begin(), out.end(), y_l);
  if (it == out.end() || *it != y_l) out.insert(it, y_l);
  return out;
}

namespace detail {

/// Uniform draw from {0..n-1} minus a sorted exclusion list, by rank mapping.
inline EntityId draw_excluding(std::size_t n, std::span<const EntityId> excluded_sorted, Rng& rng) {
  std::size_t k = uniform_index(rng, n - excluded_sorted.size());
  // Shift k past every excluded id at or below it.
  for (EntityId x : excluded_sorted) {
    if (x <= k) ++k;
    else break;
  }
  return static_cast<EntityId>(k);
}

}  // namespace detail

/// Preferred entity y_w for dis-preferred y_l. Uniform mode draws from
/// E \ {y_l}; out-boundary mode from E \ excluded_for(y_l), falling back to
/// uniform when that set is empty.
inline EntityId sample_preferred(const KnowledgeGraph& graph, EntityId y_l, PreferredSampling mode, Rng& rng) {
  graph.check_entity(y_l);
  const std::size_t n = graph.num_entities();
  if (n < 2) throw SamplingError("preferred sampling needs at least two entities");
  if (mode == PreferredSampling::out_boundary) {
    const std::vector<EntityId> excluded = excluded_for(graph, y_l);
    if (excluded.size() < n) return detail::draw_excluding(n, excluded, rng);
    spdlog::warn("entity {} is adjacent to every entity; falling back to uniform preferred sampling", y_l);
  }
  const EntityId only[] = {y_l};
  return detail::draw_excluding(n, only, rng);
}

/// One preference sample per forgetting triple, in forget-set order.
inline std::vector<PreferenceSample> transfer_dataset(std::span<const Triple> forget, const KnowledgeGraph& graph,
                                                      const SamplerConfig& config) {
  if (forget.empty()) throw DomainError("forgetting set is empty");
  Rng mask_rng = derive_rng(config.seed, 11);
  Rng pick_rng = derive_rng(config.seed, 12);
  std::vector<PreferenceSample> out;
  out.reserve(forget.size());
  for (const Triple& t : forget) {
    graph.check_triple(t);
    const MaskedQuery q = mask_direction(t, mask_rng);
    out.push_back(q.with_preferred(sample_preferred(graph, q.dispreferred, config.mode, pick_rng)));
  }
  return out;
}

/// `s<TAB>h<TAB>r<TAB>t<TAB>y_w` per sample, s in {H,T}, names from the graph.
inline void write_preference_tsv(std::ostream& out, const KnowledgeGraph& graph,
                                 std::span<const PreferenceSample> samples) {
  for (const PreferenceSample& s : samples) {
    const Triple t = s.dispreferred_triple();
    out << (s.direction == MaskDirection::head ? 'H' : 'T') << '\t' << graph.entity_name(t.head) << '\t'
        << graph.relation_name(t.relation) << '\t' << graph.entity_name(t.tail) << '\t'
        << graph.entity_name(s.preferred) << '\n';
  }
}

}  // namespace kgeu
