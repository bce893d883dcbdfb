#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/preference.hpp"
#include "kgeu/random.hpp"

// Seeded graph generators for tests, acceptance runs and the CLI demo paths.

namespace kgeu {

inline std::vector<std::string> numbered_names(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

/// `triples` distinct triples drawn uniformly, self-loops allowed.
inline KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples,
                                   std::uint64_t seed) {
  if (entities == 0 || relations == 0) throw ConfigError("random graph needs entities and relations");
  const double capacity = static_cast<double>(entities) * static_cast<double>(entities) * static_cast<double>(relations);
  if (static_cast<double>(triples) > capacity) throw ConfigError("more triples requested than distinct triples exist");
  Rng rng = derive_rng(seed, 41);
  std::unordered_set<Triple, TripleHash> seen;
  std::vector<Triple> out;
  out.reserve(triples);
  while (out.size() < triples) {
    Triple t{static_cast<EntityId>(uniform_index(rng, entities)), static_cast<RelationId>(uniform_index(rng, relations)),
             static_cast<EntityId>(uniform_index(rng, entities))};
    if (seen.insert(t).second) out.push_back(t);
  }
  return KnowledgeGraph(numbered_names("e", entities), numbered_names("r", relations), out);
}

/// Entity table whose row e depends only on (seed, e), so instances of
/// different sizes share their leading rows.
inline EmbeddingModel nested_random_model(std::size_t entities, std::size_t relations, std::size_t dim,
                                          std::uint64_t seed, double scale = 1.0) {
  EmbeddingModel model(entities, relations, dim);
  std::normal_distribution<double> normal(0.0, scale);
  for (std::size_t e = 0; e < entities; ++e) {
    Rng rng = derive_rng(seed, 100000 + e);
    for (std::size_t j = 0; j < dim; ++j) model.entities()(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(j)) = normal(rng);
  }
  for (std::size_t r = 0; r < relations; ++r) {
    Rng rng = derive_rng(seed, 200000 + r);
    for (std::size_t j = 0; j < dim; ++j) model.relations()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = normal(rng);
  }
  return model;
}

struct TheoryInstance {
  KnowledgeGraph graph;
  EmbeddingModel model;
  std::vector<MaskedQuery> queries;
};

/// Random graph and model with `forget` of its triples masked by a seeded coin.
inline TheoryInstance theory_instance(std::size_t entities, std::size_t relations, std::size_t triples,
                                      std::size_t forget, std::size_t dim, std::uint64_t seed) {
  KnowledgeGraph graph = random_graph(entities, relations, triples, seed);
  EmbeddingModel model = nested_random_model(entities, relations, dim, seed, 0.5);
  if (forget > graph.num_triples()) throw ConfigError("more forget triples than graph triples");
  Rng rng = derive_rng(seed, 43);
  std::vector<Triple> chosen = sample_without_replacement<Triple>(graph.triples(), forget, rng);
  std::vector<MaskedQuery> queries;
  for (const Triple& t : chosen) queries.push_back(mask_direction(t, rng));
  return {std::move(graph), std::move(model), std::move(queries)};
}

/// Entity 0 linked to entities 1..boundary; every other entity is isolated.
/// One query masks entity 0 out of (0, r0, 1).
inline TheoryInstance boundary_sweep_instance(std::size_t entities, std::size_t boundary, std::size_t dim,
                                              std::uint64_t seed) {
  if (boundary < 1 || entities < boundary + 2) throw ConfigError("sweep needs entities > boundary + 1");
  std::vector<Triple> triples;
  for (EntityId e = 1; e <= boundary; ++e) triples.push_back({0, 0, e});
  KnowledgeGraph graph(numbered_names("e", entities), numbered_names("r", 1), triples);
  EmbeddingModel model = nested_random_model(entities, 1, dim, seed, 0.5);
  std::vector<MaskedQuery> queries{mask_with(triples.front(), MaskDirection::head)};
  return {std::move(graph), std::move(model), std::move(queries)};
}

}  // namespace kgeu
