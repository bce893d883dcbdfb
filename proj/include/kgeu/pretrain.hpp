#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "kgeu/adam.hpp"
#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/losses.hpp"
#include "kgeu/random.hpp"

namespace kgeu {

struct PretrainConfig {
  std::size_t dim = 200;
  double margin = 8.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim == 0) throw ConfigError("dim must be positive");
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (negatives_per_positive < 1) throw ConfigError("negatives per positive must be at least 1");
  }
};

inline EmbeddingModel init_model(const KnowledgeGraph& graph, const PretrainConfig& config) {
  if (config.dim == 0) throw ConfigError("dim must be positive");
  return init_model(graph.num_entities(), graph.num_relations(), config.dim, config.seed);
}

/// Corrupts head or tail (fair coin) with a uniformly drawn different entity.
inline Triple sample_negative(std::size_t num_entities, const Triple& t, Rng& rng) {
  if (num_entities < 2) throw SamplingError("negative sampling needs at least two entities");
  const bool corrupt_head = fair_coin(rng);
  const EntityId original = corrupt_head ? t.head : t.tail;
  EntityId e = static_cast<EntityId>(uniform_index(rng, num_entities - 1));
  if (e >= original) ++e;
  Triple out = t;
  (corrupt_head ? out.head : out.tail) = e;
  return out;
}

inline Triple sample_negative(const KnowledgeGraph& graph, const Triple& t, Rng& rng) {
  graph.check_triple(t);
  return sample_negative(graph.num_entities(), t, rng);
}

/// Knobs shared by pretraining, fine-tuning and negative-gradient training.
struct MarginTrainingOptions {
  /// +1 descends the margin objective, -1 ascends it.
  double direction = 1.0;
  /// Rescale moved entity rows to unit norm after each update.
  bool renormalize = true;
  /// Sees every positive batch before its update.
  std::function<void(std::span<const Triple>)> on_batch;
  /// Called with (1-based epoch, mean loss) after each epoch.
  std::function<void(std::size_t, double)> on_epoch;
  /// Sees the model after every update (and renormalization).
  std::function<void(const EmbeddingModel&)> after_update;
};

/// Mini-batch Adam on the margin-ranking objective over `training`, starting
/// from `model`. Returns per-epoch mean losses.
inline std::vector<double> train_margin(EmbeddingModel& model, std::span<const Triple> training,
                                        const PretrainConfig& config, const MarginTrainingOptions& options = {}) {
  config.validate();
  if (training.empty()) throw DomainError("training set is empty");
  std::vector<double> epoch_losses;
  AdamState adam(model);
  Gradients grads(model);
  Rng rng = derive_rng(config.seed, 1);
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triple> positives, pos_rep, negatives;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      positives.clear();
      for (std::size_t i = begin; i < end; ++i) positives.push_back(training[order[i]]);
      if (options.on_batch) options.on_batch(positives);
      pos_rep.clear();
      negatives.clear();
      for (const Triple& p : positives) {
        for (std::size_t k = 0; k < config.negatives_per_positive; ++k) {
          pos_rep.push_back(p);
          negatives.push_back(sample_negative(model.num_entities(), p, rng));
        }
      }
      grads.clear();
      const double loss = margin_ranking_loss(model, pos_rep, negatives, config.margin, &grads, options.direction);
      if (!std::isfinite(loss)) throw TrainingError(epoch, "non-finite margin loss");
      sum += loss * static_cast<double>(positives.size());
      try {
        adam.step(model, grads, config.learning_rate);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, e.what());
      }
      if (options.renormalize) {
        for (EntityId e : adam.active_entities()) renormalize_entity(model, e);
      }
      if (options.after_update) options.after_update(model);
    }
    const double mean = sum / static_cast<double>(training.size());
    if (!std::isfinite(mean) || !model.all_finite()) throw TrainingError(epoch, "training diverged");
    epoch_losses.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  return epoch_losses;
}

/// Fresh initialization followed by margin-ranking training on the graph.
inline EmbeddingModel pretrain(const KnowledgeGraph& graph, const PretrainConfig& config,
                               const MarginTrainingOptions& options = {}) {
  config.validate();
  if (graph.num_triples() == 0) throw DomainError("cannot pretrain on an empty graph");
  EmbeddingModel model = init_model(graph, config);
  train_margin(model, graph.triples().view(), config, options);
  return model;
}

}  // namespace kgeu
