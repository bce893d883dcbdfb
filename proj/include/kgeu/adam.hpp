#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"

namespace kgeu {

/// Row-sparse gradient accumulator shaped like an EmbeddingModel. Only rows
/// that were touched are cleared between batches.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const EmbeddingModel& shape)
      : entity_(Table::Zero(shape.entities().rows(), shape.entities().cols())),
        relation_(Table::Zero(shape.relations().rows(), shape.relations().cols())),
        entity_mark_(shape.num_entities(), 0),
        relation_mark_(shape.num_relations(), 0) {}

  auto entity_row(EntityId e) {
    if (!entity_mark_[e]) {
      entity_mark_[e] = 1;
      touched_entities_.push_back(e);
    }
    return entity_.row(e);
  }
  auto relation_row(RelationId r) {
    if (!relation_mark_[r]) {
      relation_mark_[r] = 1;
      touched_relations_.push_back(r);
    }
    return relation_.row(r);
  }

  const Table& entity() const noexcept { return entity_; }
  const Table& relation() const noexcept { return relation_; }
  std::span<const EntityId> touched_entities() const noexcept { return touched_entities_; }
  std::span<const RelationId> touched_relations() const noexcept { return touched_relations_; }

  void clear() {
    for (EntityId e : touched_entities_) {
      entity_.row(e).setZero();
      entity_mark_[e] = 0;
    }
    for (RelationId r : touched_relations_) {
      relation_.row(r).setZero();
      relation_mark_[r] = 0;
    }
    touched_entities_.clear();
    touched_relations_.clear();
  }

  void scale(double factor) {
    for (EntityId e : touched_entities_) entity_.row(e) *= factor;
    for (RelationId r : touched_relations_) relation_.row(r) *= factor;
  }

  /// this += weight * other
  void accumulate(const Gradients& other, double weight) {
    for (EntityId e : other.touched_entities_) entity_row(e) += weight * other.entity_.row(e);
    for (RelationId r : other.touched_relations_) relation_row(r) += weight * other.relation_.row(r);
  }

  bool all_finite() const {
    for (EntityId e : touched_entities_)
      if (!entity_.row(e).allFinite()) return false;
    for (RelationId r : touched_relations_)
      if (!relation_.row(r).allFinite()) return false;
    return true;
  }

 private:
  Table entity_;
  Table relation_;
  std::vector<std::uint8_t> entity_mark_;
  std::vector<std::uint8_t> relation_mark_;
  std::vector<EntityId> touched_entities_;
  std::vector<RelationId> touched_relations_;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update on flat buffers; `step` is the 1-based
/// index of this update.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                        std::span<double> v, std::uint64_t step, double lr, const AdamHyper& hyper = {}) {
  if (params.size() != grads.size() || m.size() != params.size() || v.size() != params.size()) {
    throw DomainError("adam buffers differ in shape");
  }
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NumericError("non-finite gradient in adam update");
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hyper.epsilon);
  }
}

/// Moment tables for both embedding tables. Rows whose moments are still zero
/// and receive a zero gradient would not move under Adam, so they are skipped
/// until their first nonzero-support update.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const EmbeddingModel& shape, AdamHyper hyper = {})
      : hyper_(hyper),
        m_entity_(Table::Zero(shape.entities().rows(), shape.entities().cols())),
        v_entity_(Table::Zero(shape.entities().rows(), shape.entities().cols())),
        m_relation_(Table::Zero(shape.relations().rows(), shape.relations().cols())),
        v_relation_(Table::Zero(shape.relations().rows(), shape.relations().cols())),
        entity_active_(shape.num_entities(), 0),
        relation_active_(shape.num_relations(), 0) {}

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  const Table& first_moment_entities() const noexcept { return m_entity_; }
  const Table& second_moment_entities() const noexcept { return v_entity_; }

  /// Applies one update to every row with live moments.
  void step(EmbeddingModel& model, const Gradients& grads, double lr) {
    if (!grads.all_finite()) throw NumericError("non-finite gradient in adam update");
    ++steps_;
    for (EntityId e : grads.touched_entities()) activate(entity_active_, active_entities_, e);
    for (RelationId r : grads.touched_relations()) activate(relation_active_, active_relations_, r);
    const auto cols = static_cast<std::size_t>(model.dim());
    for (EntityId e : active_entities_) {
      adam_update(row_span(model.entities(), e, cols), row_span(grads.entity(), e, cols),
                  row_span(m_entity_, e, cols), row_span(v_entity_, e, cols), steps_, lr, hyper_);
    }
    for (RelationId r : active_relations_) {
      adam_update(row_span(model.relations(), r, cols), row_span(grads.relation(), r, cols),
                  row_span(m_relation_, r, cols), row_span(v_relation_, r, cols), steps_, lr, hyper_);
    }
  }

  std::span<const EntityId> active_entities() const noexcept { return active_entities_; }

 private:
  static void activate(std::vector<std::uint8_t>& mark, std::vector<std::uint32_t>& list, std::uint32_t id) {
    if (mark[id]) return;
    mark[id] = 1;
    list.push_back(id);
  }

  static std::span<double> row_span(Table& t, std::uint32_t row, std::size_t cols) {
    return {t.data() + static_cast<std::size_t>(row) * cols, cols};
  }
  static std::span<const double> row_span(const Table& t, std::uint32_t row, std::size_t cols) {
    return {t.data() + static_cast<std::size_t>(row) * cols, cols};
  }

  AdamHyper hyper_;
  Table m_entity_, v_entity_, m_relation_, v_relation_;
  std::vector<std::uint8_t> entity_active_, relation_active_;
  std::vector<EntityId> active_entities_;
  std::vector<RelationId> active_relations_;
  std::uint64_t steps_ = 0;
};

}  // namespace kgeu
