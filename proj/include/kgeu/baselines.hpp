#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/evaluation.hpp"
#include "kgeu/graph.hpp"
#include "kgeu/graphdpo.hpp"
#include "kgeu/pretrain.hpp"
#include "kgeu/splits.hpp"

namespace kgeu {

enum class Method : std::uint8_t { graphdpo, retrain, finetune, neg_gradient };

inline Method parse_method(const std::string& s) {
  if (s == "graphdpo") return Method::graphdpo;
  if (s == "retrain") return Method::retrain;
  if (s == "finetune") return Method::finetune;
  if (s == "ng") return Method::neg_gradient;
  throw ConfigError("unknown method '" + s + "' (expected graphdpo, retrain, finetune or ng)");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::graphdpo: return "graphdpo";
    case Method::retrain: return "retrain";
    case Method::finetune: return "finetune";
    case Method::neg_gradient: return "ng";
  }
  return "?";
}

/// Fresh initialization, then margin-ranking training on the remaining set only.
inline EmbeddingModel retrain(const KnowledgeGraph& graph, const TripleSet& remain, const PretrainConfig& config,
                              const MarginTrainingOptions& options = {}) {
  if (remain.empty()) throw DomainError("remaining set is empty");
  config.validate();
  EmbeddingModel model = init_model(graph, config);
  train_margin(model, remain.view(), config, options);
  return model;
}

/// Continues margin-ranking training from `model` on the remaining set.
inline EmbeddingModel finetune(EmbeddingModel model, const TripleSet& remain, const PretrainConfig& config,
                               const MarginTrainingOptions& options = {}) {
  if (config.epochs == 0) return model;
  if (remain.empty()) throw DomainError("remaining set is empty");
  train_margin(model, remain.view(), config, options);
  return model;
}

/// Gradient ascent on the margin-ranking objective restricted to the
/// forgetting set, with the fine-tuning schedule.
inline EmbeddingModel neg_gradient(EmbeddingModel model, const TripleSet& forget, const PretrainConfig& config,
                                   MarginTrainingOptions options = {}) {
  if (config.epochs == 0) return model;
  if (forget.empty()) throw DomainError("forgetting set is empty");
  options.direction = -1.0;
  train_margin(model, forget.view(), config, options);
  return model;
}

/// Baseline arm over a timeline. Re-Train restarts from scratch at every step;
/// Fine-Tune and NG carry the model forward.
inline std::vector<StepOutcome> run_baseline_timeline(Method method, const EmbeddingModel& pretrained,
                                                      const KnowledgeGraph& graph, const UnlearnTimeline& timeline,
                                                      const PretrainConfig& config, const Evaluator& evaluator,
                                                      const std::function<void(const StepOutcome&)>& on_step = {}) {
  if (method == Method::graphdpo) throw ConfigError("graphdpo is not a baseline");
  std::vector<StepOutcome> out;
  EmbeddingModel current = pretrained;
  for (std::size_t i = 1; i <= timeline.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    PretrainConfig step_config = config;
    step_config.seed = step_seed(config.seed, i);
    const StepSplit& split = timeline.step(i);
    std::vector<double> losses;
    MarginTrainingOptions options;
    options.on_epoch = [&](std::size_t, double loss) { losses.push_back(loss); };
    switch (method) {
      case Method::retrain: current = retrain(graph, split.remain, step_config, options); break;
      case Method::finetune: current = finetune(std::move(current), split.remain, step_config, options); break;
      case Method::neg_gradient: current = neg_gradient(std::move(current), split.forget, step_config, options); break;
      case Method::graphdpo: break;
    }
    StepOutcome o;
    o.report = evaluate_step(current, timeline, i, evaluator);
    o.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t e = 0; e < losses.size(); ++e) {
      EpochLog log;
      log.epoch = e + 1;
      log.total = losses[e];
      o.epochs.push_back(log);
    }
    o.model = current;
    if (on_step) on_step(o);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace kgeu
