#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/splits.hpp"

namespace kgeu {

enum class RankDirection : std::uint8_t { head, tail };

/// Rank of `scores[truth]` among candidates (higher score is better), skipping
/// candidates flagged in `excluded`. Ties count half: 1 + #better + #ties / 2.
inline double rank_from_scores(std::span<const double> scores, std::size_t truth,
                               std::span<const std::uint8_t> excluded = {}) {
  const double target = scores[truth];
  std::size_t better = 0, ties = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == truth || (!excluded.empty() && excluded[c])) continue;
    if (scores[c] > target) ++better;
    else if (scores[c] == target) ++ties;
  }
  return 1.0 + static_cast<double>(better) + 0.5 * static_cast<double>(ties);
}

/// Known answers per (head, relation) and (relation, tail) query.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const TripleSet& source) {
    for (const Triple& t : source) {
      tails_[key(t.head, t.relation)].push_back(t.tail);
      heads_[key(t.tail, t.relation)].push_back(t.head);
    }
  }

  std::span<const EntityId> answers(const Triple& t, RankDirection dir) const {
    const auto& map = dir == RankDirection::tail ? tails_ : heads_;
    auto it = map.find(dir == RankDirection::tail ? key(t.head, t.relation) : key(t.tail, t.relation));
    if (it == map.end()) return {};
    return it->second;
  }

 private:
  static std::uint64_t key(EntityId e, RelationId r) { return (std::uint64_t{e} << 32) | r; }
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
};

struct RankingConfig {
  bool filtered = true;
  /// Worker threads for MRR; results are identical for any count.
  std::size_t threads = 1;
};

/// Link-prediction ranking against all entities, optionally filtered by a
/// fixed source triple set (the original graph).
class Evaluator {
 public:
  Evaluator(const TripleSet& filter_source, RankingConfig config = {})
      : config_(config), filter_(std::make_shared<FilterIndex>(filter_source)) {}

  const RankingConfig& config() const noexcept { return config_; }

  /// Negated distances of every candidate in the masked slot.
  static std::vector<double> candidate_scores(const EmbeddingModel& model, const Triple& t, RankDirection dir) {
    model.check_triple(t);
    const auto& ents = model.entities();
    std::vector<double> scores(model.num_entities());
    if (dir == RankDirection::tail) {
      const Eigen::RowVectorXd q = model.entity(t.head) + model.relation(t.relation);
      for (Eigen::Index c = 0; c < ents.rows(); ++c) scores[static_cast<std::size_t>(c)] = -(q - ents.row(c)).norm();
    } else {
      const Eigen::RowVectorXd q = model.entity(t.tail) - model.relation(t.relation);
      for (Eigen::Index c = 0; c < ents.rows(); ++c) scores[static_cast<std::size_t>(c)] = -(ents.row(c) - q).norm();
    }
    return scores;
  }

  double rank(const EmbeddingModel& model, const Triple& t, RankDirection dir) const {
    const std::vector<double> scores = candidate_scores(model, t, dir);
    const EntityId truth = dir == RankDirection::tail ? t.tail : t.head;
    if (!config_.filtered) return rank_from_scores(scores, truth);
    thread_local std::vector<std::uint8_t> excluded;
    excluded.assign(scores.size(), 0);
    for (EntityId e : filter_->answers(t, dir)) excluded[e] = 1;
    excluded[truth] = 0;
    return rank_from_scores(scores, truth, excluded);
  }

  /// Per triple: mean of head and tail reciprocal ranks.
  double reciprocal_rank(const EmbeddingModel& model, const Triple& t) const {
    return 0.5 * (1.0 / rank(model, t, RankDirection::head) + 1.0 / rank(model, t, RankDirection::tail));
  }

  double mrr(const EmbeddingModel& model, std::span<const Triple> triples) const {
    if (triples.empty()) throw DomainError("MRR over an empty triple set");
    std::vector<double> rr(triples.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(config_.threads, triples.size()));
    if (workers == 1) {
      for (std::size_t i = 0; i < triples.size(); ++i) rr[i] = reciprocal_rank(model, triples[i]);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < triples.size(); i += workers) rr[i] = reciprocal_rank(model, triples[i]);
        });
      }
    }
    double sum = 0.0;
    for (double v : rr) sum += v;
    return sum / static_cast<double>(triples.size());
  }

  double mrr(const EmbeddingModel& model, const TripleSet& triples) const { return mrr(model, triples.view()); }

 private:
  RankingConfig config_;
  std::shared_ptr<const FilterIndex> filter_;
};

struct Aggregate {
  double avg = 0.0;
  double f1 = 0.0;
};

/// Balance of retention (m_r) and forgetting (1 - m_f): arithmetic and
/// harmonic means.
inline Aggregate aggregate(double m_f, double m_r) {
  const double keep = 1.0 - m_f;
  const double denom = m_r + keep;
  return {0.5 * denom, denom == 0.0 ? 0.0 : 2.0 * m_r * keep / denom};
}

struct EvalReport {
  std::size_t step = 0;
  double m_f = 0.0;
  double m_r = 0.0;
  double m_avg = 0.0;
  double m_f1 = 0.0;
  std::size_t n_forget = 0;
  std::size_t n_remain = 0;
  double seconds = 0.0;
};

/// MRR over forget(1..i) and remain(i) with aggregates.
inline EvalReport evaluate_step(const EmbeddingModel& model, const UnlearnTimeline& timeline, std::size_t i,
                                const Evaluator& evaluator) {
  const TripleSet forgotten = timeline.accumulated_forget(i);
  const TripleSet& remain = timeline.step(i).remain;
  EvalReport r;
  r.step = i;
  r.n_forget = forgotten.size();
  r.n_remain = remain.size();
  r.m_f = evaluator.mrr(model, forgotten);
  r.m_r = evaluator.mrr(model, remain);
  const Aggregate a = aggregate(r.m_f, r.m_r);
  r.m_avg = a.avg;
  r.m_f1 = a.f1;
  return r;
}

inline constexpr const char* kReportCsvHeader = "step,m_f,m_r,m_avg,m_f1,n_forget,n_remain,seconds";

inline void write_report_row(std::ostream& out, const EvalReport& r) {
  const auto old_precision = out.precision(17);
  out << r.step << ',' << r.m_f << ',' << r.m_r << ',' << r.m_avg << ',' << r.m_f1 << ',' << r.n_forget << ','
      << r.n_remain << ',';
  out.precision(6);
  out << r.seconds << '\n';
  out.precision(old_precision);
}

}  // namespace kgeu
