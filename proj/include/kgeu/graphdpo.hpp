#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "kgeu/adam.hpp"
#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/evaluation.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/losses.hpp"
#include "kgeu/preference.hpp"
#include "kgeu/pretrain.hpp"
#include "kgeu/random.hpp"
#include "kgeu/splits.hpp"

namespace kgeu {

enum class ReplayForm : std::uint8_t {
  /// Hinge on raw distances, the pretraining objective's form.
  distance,
  /// Hinge on sigmoid scores as max(0, f(pos) - f(neg) + margin).
  score,
};

struct UnlearnConfig {
  LossWeights weights;
  std::size_t epochs = 50;
  /// Stop once forget-set MRR has not decreased for this many epochs; 0 disables.
  std::size_t patience = 5;
  double learning_rate = 3e-3;
  std::size_t batch_size = 512;
  PreferredSampling sampling = PreferredSampling::out_boundary;
  bool resample_each_epoch = false;
  ReplayForm replay_form = ReplayForm::distance;
  /// Replay set bound as a fraction of the full graph.
  double replay_cap_fraction = 0.10;
  std::uint64_t seed = 0;

  void validate() const {
    weights.validate();
    if (epochs < 1) throw ConfigError("unlearning epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("unlearning learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(replay_cap_fraction >= 0.0 && replay_cap_fraction <= 1.0)) {
      throw ConfigError("replay cap fraction must lie in [0, 1]");
    }
  }
};

/// Boundary triples of every dis-preferred entity that are still in the
/// remaining set, subsampled uniformly to cap_fraction * |graph|.
inline TripleSet build_replay_set(const KnowledgeGraph& graph, std::span<const PreferenceSample> samples,
                                  const TripleSet& remain, double cap_fraction, Rng& rng) {
  std::vector<std::uint8_t> visited(graph.num_entities(), 0);
  TripleSet pool;
  for (const PreferenceSample& s : samples) {
    if (visited[s.dispreferred]) continue;
    visited[s.dispreferred] = 1;
    for (std::uint32_t i : graph.incident(s.dispreferred)) {
      const Triple& t = graph.triples()[i];
      if (remain.contains(t)) pool.insert(t);
    }
  }
  const std::size_t cap = quota_of(cap_fraction, graph.num_triples());
  if (pool.size() <= cap) return pool;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::size_t> keep = sample_without_replacement<std::size_t>(idx, cap, rng);
  std::sort(keep.begin(), keep.end());
  TripleSet out;
  for (std::size_t i : keep) out.insert(pool[i]);
  return out;
}

/// Boundary neighbours of the dis-preferred entities, minus those entities.
inline std::vector<EntityId> build_distill_set(const KnowledgeGraph& graph,
                                               std::span<const PreferenceSample> samples) {
  std::vector<std::uint8_t> is_target(graph.num_entities(), 0), in_set(graph.num_entities(), 0);
  for (const PreferenceSample& s : samples) is_target[s.dispreferred] = 1;
  std::vector<EntityId> out;
  for (EntityId y = 0; y < graph.num_entities(); ++y) {
    if (!is_target[y]) continue;
    for (EntityId e : boundary_entities(graph, y)) {
      if (is_target[e] || in_set[e]) continue;
      in_set[e] = 1;
      out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  double dpo = 0.0;
  double replay = 0.0;
  double distill = 0.0;
  double total = 0.0;
  /// Forget-set MRR after the epoch, when early stopping is active.
  double forget_mrr = -1.0;
  double seconds = 0.0;
};

struct UnlearnResult {
  EmbeddingModel model;
  std::vector<EpochLog> epochs;
  std::size_t replay_size = 0;
  std::size_t distill_size = 0;
  std::size_t samples = 0;
  /// Preference dataset as first built for the step.
  std::vector<PreferenceSample> preferences;
};

struct UnlearnHooks {
  /// Called with each epoch's log as it completes.
  std::function<void(const EpochLog&)> on_epoch;
  /// Sees the model after every optimizer step; for audits in tests.
  std::function<void(const EmbeddingModel&)> after_update;
};

/// One GraphDPO time step: freeze a reference copy of `model`, build the
/// preference, replay and distillation sets, then minimise the weighted sum
/// of the three losses with Adam.
inline UnlearnResult unlearn_step(EmbeddingModel model, const KnowledgeGraph& graph, const TripleSet& forget,
                                  const TripleSet& remain, const UnlearnConfig& config, const Evaluator* evaluator,
                                  const UnlearnHooks& hooks = {}) {
  config.validate();
  if (forget.empty()) throw DomainError("forgetting set is empty");
  const EmbeddingModel reference = model;
  const LossWeights& w = config.weights;

  SamplerConfig sampler{config.sampling, derive_rng(config.seed, 21)()};
  std::vector<PreferenceSample> samples = transfer_dataset(forget.view(), graph, sampler);
  Rng replay_rng = derive_rng(config.seed, 22);
  const TripleSet replay = build_replay_set(graph, samples, remain, config.replay_cap_fraction, replay_rng);
  const std::vector<EntityId> distill = build_distill_set(graph, samples);

  UnlearnResult result;
  result.replay_size = replay.size();
  result.distill_size = distill.size();
  result.samples = samples.size();
  result.preferences = samples;

  AdamState adam(model);
  Gradients grads(model);
  Rng rng = derive_rng(config.seed, 23);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triple> replay_order(replay.begin(), replay.end());
  std::vector<PreferenceSample> batch;
  std::vector<Triple> replay_pos, replay_neg;

  double best_forget = evaluator ? evaluator->mrr(model, forget) : 0.0;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (config.resample_each_epoch && epoch > 1) {
      sampler.seed = derive_rng(config.seed, 1000 + epoch)();
      samples = transfer_dataset(forget.view(), graph, sampler);
    }
    shuffle_in_place(order, rng);
    shuffle_in_place(replay_order, rng);
    const std::size_t batches = (samples.size() + config.batch_size - 1) / config.batch_size;

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      const std::size_t end = std::min(samples.size(), (b + 1) * config.batch_size);
      for (std::size_t i = b * config.batch_size; i < end; ++i) batch.push_back(samples[order[i]]);
      replay_pos.assign(replay_order.begin() + static_cast<std::ptrdiff_t>(b * replay_order.size() / batches),
                        replay_order.begin() + static_cast<std::ptrdiff_t>((b + 1) * replay_order.size() / batches));
      replay_neg.clear();
      for (const Triple& t : replay_pos) replay_neg.push_back(sample_negative(graph.num_entities(), t, rng));

      grads.clear();
      double l_dpo = 0.0, l_replay = 0.0, l_distill = 0.0;
      l_dpo = dpo_loss(model, reference, batch, w.beta, w.dpo > 0.0 ? &grads : nullptr, w.dpo);
      if (w.replay > 0.0 && !replay_pos.empty()) {
        l_replay = config.replay_form == ReplayForm::distance
                       ? margin_ranking_loss(model, replay_pos, replay_neg, w.replay_margin, &grads, w.replay)
                       : score_margin_loss(model, replay_pos, replay_neg, w.replay_margin, &grads, w.replay);
      }
      if (w.distill > 0.0) l_distill = distill_loss(model, reference, distill, &grads, w.distill);

      const double share = static_cast<double>(batch.size()) / static_cast<double>(samples.size());
      log.dpo += share * l_dpo;
      log.replay += share * l_replay;
      log.distill += share * l_distill;
      try {
        adam.step(model, grads, config.learning_rate);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, e.what());
      }
      if (hooks.after_update) hooks.after_update(model);
    }
    log.total = total_loss(w, log.dpo, log.replay, log.distill);
    if (!std::isfinite(log.total) || !model.all_finite()) throw TrainingError(epoch, "unlearning diverged");

    bool stop = false;
    if (evaluator && config.patience > 0) {
      log.forget_mrr = evaluator->mrr(model, forget);
      if (log.forget_mrr < best_forget) {
        best_forget = log.forget_mrr;
        stale = 0;
      } else if (++stale >= config.patience) {
        stop = true;
      }
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
    if (stop) break;
  }
  result.model = std::move(model);
  return result;
}

struct StepOutcome {
  EmbeddingModel model;
  EvalReport report;
  std::vector<EpochLog> epochs;
  std::vector<PreferenceSample> preferences;
};

/// Seed of time step i derived from a run seed.
inline std::uint64_t step_seed(std::uint64_t seed, std::size_t step) { return mix_seed(seed ^ (0x1000ULL + step)); }

/// Continual unlearning: each step starts from the previous step's model with
/// a fresh reference snapshot, then is evaluated.
inline std::vector<StepOutcome> run_timeline(const EmbeddingModel& pretrained, const KnowledgeGraph& graph,
                                             const UnlearnTimeline& timeline, const UnlearnConfig& config,
                                             const Evaluator& evaluator,
                                             const std::function<void(const StepOutcome&)>& on_step = {},
                                             const UnlearnHooks& hooks = {}) {
  std::vector<StepOutcome> out;
  EmbeddingModel current = pretrained;
  for (std::size_t i = 1; i <= timeline.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    UnlearnConfig step_config = config;
    step_config.seed = step_seed(config.seed, i);
    const StepSplit& split = timeline.step(i);
    UnlearnResult r = unlearn_step(std::move(current), graph, split.forget, split.remain, step_config, &evaluator, hooks);
    StepOutcome o;
    o.report = evaluate_step(r.model, timeline, i, evaluator);
    o.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.epochs = std::move(r.epochs);
    o.preferences = std::move(r.preferences);
    current = r.model;
    o.model = std::move(r.model);
    if (on_step) on_step(o);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace kgeu
