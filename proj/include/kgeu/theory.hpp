#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/preference.hpp"
#include "kgeu/random.hpp"

// Exact expectations of the unlearning and preference objectives on small
// graphs, with the affine identities relating them. Maskings are held fixed,
// so every identity is per-dataset.

namespace kgeu {

/// Mean score of the forgetting triples.
inline double unlearn_expectation(const EmbeddingModel& model, std::span<const Triple> forget) {
  if (forget.empty()) throw DomainError("unlearning expectation over an empty set");
  double sum = 0.0;
  for (const Triple& t : forget) sum += score(model, t);
  return sum / static_cast<double>(forget.size());
}

/// Entities a preferred answer may be drawn from for this query.
inline std::vector<EntityId> preferred_candidates(const KnowledgeGraph& graph, const MaskedQuery& q,
                                                  PreferredSampling mode) {
  std::vector<EntityId> out;
  if (mode == PreferredSampling::uniform) {
    for (EntityId e = 0; e < graph.num_entities(); ++e)
      if (e != q.dispreferred) out.push_back(e);
    return out;
  }
  const std::vector<EntityId> excluded = excluded_for(graph, q.dispreferred);
  std::size_t j = 0;
  for (EntityId e = 0; e < graph.num_entities(); ++e) {
    while (j < excluded.size() && excluded[j] < e) ++j;
    if (j < excluded.size() && excluded[j] == e) continue;
    out.push_back(e);
  }
  return out;
}

/// Mean over queries of f(x, y_l) minus the exact candidate-average of
/// f(x, y_w), by enumeration.
inline double preference_expectation_exact(const EmbeddingModel& model, const KnowledgeGraph& graph,
                                           std::span<const MaskedQuery> queries, PreferredSampling mode) {
  if (queries.empty()) throw DomainError("preference expectation over an empty set");
  double sum = 0.0;
  for (const MaskedQuery& q : queries) {
    const std::vector<EntityId> cands = preferred_candidates(graph, q, mode);
    if (cands.empty()) throw DomainError("empty preferred-candidate set");
    double inner = 0.0;
    for (EntityId y : cands) inner += score(model, q.complete(y));
    sum += score(model, q.complete(q.dispreferred)) - inner / static_cast<double>(cands.size());
  }
  return sum / static_cast<double>(queries.size());
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t draws = 0;
};

/// Estimates the same expectation by drawing y_w through the sampler,
/// `draws_per_query` times per query.
inline MonteCarloEstimate preference_expectation_sampled(const EmbeddingModel& model, const KnowledgeGraph& graph,
                                                         std::span<const MaskedQuery> queries, PreferredSampling mode,
                                                         std::size_t draws_per_query, std::uint64_t seed) {
  if (queries.empty() || draws_per_query < 2) throw DomainError("sampled expectation needs queries and >= 2 draws");
  Rng rng = derive_rng(seed, 31);
  const double n = static_cast<double>(queries.size());
  const double m = static_cast<double>(draws_per_query);
  double est = 0.0, var = 0.0;
  for (const MaskedQuery& q : queries) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < draws_per_query; ++k) {
      const double f = score(model, q.complete(sample_preferred(graph, q.dispreferred, mode, rng)));
      s += f;
      s2 += f * f;
    }
    const double mean = s / m;
    est += score(model, q.complete(q.dispreferred)) - mean;
    var += (s2 - m * mean * mean) / (m - 1.0) / m;
  }
  return {est / n, std::sqrt(var) / n, queries.size() * draws_per_query};
}

struct TheoremCheck {
  std::size_t num_entities = 0;
  std::size_t num_samples = 0;
  double e_u = 0.0;
  /// Enumerated preference expectation.
  double e_p = 0.0;
  double c1 = 0.0;
  /// C / (|E| - 1).
  double c2 = 0.0;
  /// Enumeration vs closed form (the uniform identity, or the exact
  /// out-boundary identity).
  double residual = 0.0;
  /// Out-boundary only: (C - mean boundary sum) / (|E| - 1).
  double c2_corrected = 0.0;
  /// Out-boundary only: c2 - c2_corrected, the dropped correction term.
  double approximation_gap = 0.0;
  /// Out-boundary only: |e_p - (c1 * e_u - c2)|.
  double affine_gap = 0.0;

  bool bounds_hold() const { return c1 > 1.0 && c2 > 0.0 && c2 < c1; }
};

namespace detail {

inline double candidate_score_total(const EmbeddingModel& model, const MaskedQuery& q, std::size_t n) {
  double c = 0.0;
  for (EntityId y = 0; y < n; ++y) c += score(model, q.complete(y));
  return c;
}

}  // namespace detail

/// Uniform sampling: E_p = c1 * E_u - c2 with c1 = |E|/(|E|-1), c2 = C/(|E|-1).
/// `c1_offset` perturbs c1 before the check (negative controls only).
inline TheoremCheck verify_theorem1(const EmbeddingModel& model, const KnowledgeGraph& graph,
                                    std::span<const MaskedQuery> queries, double c1_offset = 0.0) {
  if (queries.empty()) throw DomainError("theorem check needs at least one sample");
  const std::size_t n = graph.num_entities();
  if (n < 2) throw DomainError("theorem check needs at least two entities");
  std::vector<Triple> forget;
  for (const MaskedQuery& q : queries) forget.push_back(q.complete(q.dispreferred));
  double c_mean = 0.0;
  for (const MaskedQuery& q : queries) c_mean += detail::candidate_score_total(model, q, n);
  c_mean /= static_cast<double>(queries.size());

  TheoremCheck out;
  out.num_entities = n;
  out.num_samples = queries.size();
  out.e_u = unlearn_expectation(model, forget);
  out.e_p = preference_expectation_exact(model, graph, queries, PreferredSampling::uniform);
  out.c1 = static_cast<double>(n) / static_cast<double>(n - 1) + c1_offset;
  out.c2 = c_mean / static_cast<double>(n - 1);
  out.residual = std::abs(out.e_p - (out.c1 * out.e_u - out.c2));
  return out;
}

/// Out-boundary sampling. The exact identity per query is
///   f_l - (C_i - f_l - B_i) / (|E| - 1 - k_i)
/// where B_i sums f over the k_i boundary neighbours of y_l (excluding y_l).
/// The affine form keeps |E| - 1 and drops B entirely.
inline TheoremCheck verify_theorem2(const EmbeddingModel& model, const KnowledgeGraph& graph,
                                    std::span<const MaskedQuery> queries, double c1_offset = 0.0) {
  if (queries.empty()) throw DomainError("theorem check needs at least one sample");
  const std::size_t n = graph.num_entities();
  if (n < 2) throw DomainError("theorem check needs at least two entities");
  std::vector<Triple> forget;
  double c_mean = 0.0, b_mean = 0.0, exact = 0.0;
  for (const MaskedQuery& q : queries) {
    forget.push_back(q.complete(q.dispreferred));
    const double f_l = score(model, q.complete(q.dispreferred));
    const double c_i = detail::candidate_score_total(model, q, n);
    double b_i = 0.0;
    std::size_t k_i = 0;
    for (EntityId e : boundary_entities(graph, q.dispreferred)) {
      if (e == q.dispreferred) continue;
      b_i += score(model, q.complete(e));
      ++k_i;
    }
    if (n - 1 - k_i == 0) throw DomainError("out-boundary candidate set is empty");
    exact += f_l - (c_i - f_l - b_i) / static_cast<double>(n - 1 - k_i);
    c_mean += c_i;
    b_mean += b_i;
  }
  const double count = static_cast<double>(queries.size());
  c_mean /= count;
  b_mean /= count;
  exact /= count;

  TheoremCheck out;
  out.num_entities = n;
  out.num_samples = queries.size();
  out.e_u = unlearn_expectation(model, forget);
  out.e_p = preference_expectation_exact(model, graph, queries, PreferredSampling::out_boundary);
  out.c1 = static_cast<double>(n) / static_cast<double>(n - 1) + c1_offset;
  out.c2 = c_mean / static_cast<double>(n - 1);
  out.c2_corrected = (c_mean - b_mean) / static_cast<double>(n - 1);
  out.residual = std::abs(out.e_p - exact) + std::abs(c1_offset) * out.e_u;
  out.approximation_gap = out.c2 - out.c2_corrected;
  out.affine_gap = std::abs(out.e_p - (out.c1 * out.e_u - out.c2));
  return out;
}

inline nlohmann::ordered_json to_json(const TheoremCheck& c) {
  nlohmann::ordered_json j;
  j["entities"] = c.num_entities;
  j["samples"] = c.num_samples;
  j["e_u"] = c.e_u;
  j["e_p"] = c.e_p;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["residual"] = c.residual;
  j["c2_corrected"] = c.c2_corrected;
  j["approximation_gap"] = c.approximation_gap;
  j["affine_gap"] = c.affine_gap;
  j["bounds_hold"] = c.bounds_hold();
  return j;
}

}  // namespace kgeu
