#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "kgeu/adam.hpp"
#include "kgeu/embedding.hpp"
#include "kgeu/error.hpp"
#include "kgeu/preference.hpp"

// Every loss here returns its value and, when `grads` is non-null, adds
// `weight * dL/dtheta` into it. Gradients are taken w.r.t. the trainee model
// only; reference models are read-only.

namespace kgeu {

namespace detail {

/// grads += coef * d||h + r - t|| / d(h, r, t). Zero subgradient at 0.
inline void add_distance_gradient(const EmbeddingModel& model, const Triple& t, double coef, Gradients& grads) {
  const Vector u = translation_residual(model, t);
  const double d = u.norm();
  if (d < 1e-300 || coef == 0.0) return;
  const Eigen::RowVectorXd g = (coef / d) * u.transpose();
  grads.entity_row(t.head) += g;
  grads.relation_row(t.relation) += g;
  grads.entity_row(t.tail) -= g;
}

/// d log(score) / d distance, honouring the distance clip.
inline double dlogscore_ddistance(double d) { return d >= kMaxScoredDistance ? 0.0 : -sigmoid(d); }

/// d score / d distance.
inline double dscore_ddistance(double d) {
  if (d >= kMaxScoredDistance) return 0.0;
  const double f = score_from_distance(d);
  return -f * (1.0 - f);
}

}  // namespace detail

/// Mean over pairs of max(0, d(pos) - d(neg) + margin) on raw distances.
inline double margin_ranking_loss(const EmbeddingModel& model, std::span<const Triple> positives,
                                  std::span<const Triple> negatives, double margin, Gradients* grads = nullptr,
                                  double weight = 1.0) {
  if (positives.size() != negatives.size()) throw DomainError("positive/negative batch sizes differ");
  if (positives.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(positives.size());
  double total = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double hinge = distance(model, positives[i]) - distance(model, negatives[i]) + margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grads) {
      detail::add_distance_gradient(model, positives[i], weight * inv_n, *grads);
      detail::add_distance_gradient(model, negatives[i], -weight * inv_n, *grads);
    }
  }
  return total * inv_n;
}

/// The same hinge applied to sigmoid scores, exactly as max(0, f(pos) - f(neg) + margin).
inline double score_margin_loss(const EmbeddingModel& model, std::span<const Triple> positives,
                                std::span<const Triple> negatives, double margin, Gradients* grads = nullptr,
                                double weight = 1.0) {
  if (positives.size() != negatives.size()) throw DomainError("positive/negative batch sizes differ");
  if (positives.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(positives.size());
  double total = 0.0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double dp = distance(model, positives[i]);
    const double dn = distance(model, negatives[i]);
    const double hinge = score_from_distance(dp) - score_from_distance(dn) + margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (grads) {
      detail::add_distance_gradient(model, positives[i], weight * inv_n * detail::dscore_ddistance(dp), *grads);
      detail::add_distance_gradient(model, negatives[i], -weight * inv_n * detail::dscore_ddistance(dn), *grads);
    }
  }
  return total * inv_n;
}

/// -log sigmoid(beta * (preferred log-ratio - dis-preferred log-ratio)) for one
/// sample, from log f_theta / f_ref of each completion.
inline double dpo_sample_loss(double preferred_log_ratio, double dispreferred_log_ratio, double beta) {
  return -log_sigmoid(beta * (preferred_log_ratio - dispreferred_log_ratio));
}

/// Scores-in form of the above, f values in (0, 1).
inline double dpo_sample_loss_from_scores(double f_w, double f_ref_w, double f_l, double f_ref_l, double beta) {
  return dpo_sample_loss(std::log(f_w) - std::log(f_ref_w), std::log(f_l) - std::log(f_ref_l), beta);
}

/// Batch-mean preference loss of the trainee against a frozen reference.
inline double dpo_loss(const EmbeddingModel& model, const EmbeddingModel& reference,
                       std::span<const PreferenceSample> batch, double beta, Gradients* grads = nullptr,
                       double weight = 1.0) {
  if (batch.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const PreferenceSample& s : batch) {
    const Triple tw = s.preferred_triple();
    const Triple tl = s.dispreferred_triple();
    const double dw = distance(model, tw);
    const double dl = distance(model, tl);
    // log f = log sigmoid(-clip(d))
    const double ratio_w = log_sigmoid(-clipped(dw)) - log_sigmoid(-clipped(distance(reference, tw)));
    const double ratio_l = log_sigmoid(-clipped(dl)) - log_sigmoid(-clipped(distance(reference, tl)));
    if (!std::isfinite(ratio_w) || !std::isfinite(ratio_l)) throw NumericError("non-finite DPO log ratio");
    const double z = beta * (ratio_w - ratio_l);
    total += -log_sigmoid(z);
    if (grads) {
      const double dloss_dz = -sigmoid(-z);
      const double coef = weight * inv_n * dloss_dz * beta;
      detail::add_distance_gradient(model, tw, coef * detail::dlogscore_ddistance(dw), *grads);
      detail::add_distance_gradient(model, tl, -coef * detail::dlogscore_ddistance(dl), *grads);
    }
  }
  return total * inv_n;
}

/// Smooth-L1 of a single difference: x^2/2 inside [-1, 1], |x| - 1/2 outside.
inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a <= 1.0 ? 0.5 * x * x : a - 0.5;
}

/// Mean over entities of the per-dimension mean smooth-L1 distance between
/// trainee and reference rows.
inline double distill_loss(const EmbeddingModel& model, const EmbeddingModel& reference,
                           std::span<const EntityId> entities, Gradients* grads = nullptr, double weight = 1.0) {
  if (entities.empty()) return 0.0;
  const double d = static_cast<double>(model.dim());
  const double inv = 1.0 / (static_cast<double>(entities.size()) * d);
  double total = 0.0;
  for (EntityId e : entities) {
    const Eigen::RowVectorXd diff = model.entity(e) - reference.entity(e);
    double row = 0.0;
    for (Eigen::Index k = 0; k < diff.size(); ++k) row += smooth_l1(diff[k]);
    total += row;
    if (grads) {
      auto g = grads->entity_row(e);
      for (Eigen::Index k = 0; k < diff.size(); ++k) {
        const double x = diff[k];
        g[k] += weight * inv * (std::abs(x) <= 1.0 ? x : (x > 0.0 ? 1.0 : -1.0));
      }
    }
  }
  return total * inv;
}

struct LossWeights {
  double beta = 1.0;
  double dpo = 1.0;      // lambda_1
  double replay = 1.0;   // lambda_2
  double distill = 1.0;  // lambda_3
  double replay_margin = 8.0;

  void validate() const {
    if (!(beta >= 0.0 && dpo >= 0.0 && replay >= 0.0 && distill >= 0.0)) {
      throw ConfigError("loss weights must be non-negative");
    }
    if (!(replay_margin > 0.0)) throw ConfigError("replay margin must be positive");
  }
};

inline double total_loss(const LossWeights& w, double dpo, double replay, double distill) {
  return w.dpo * dpo + w.replay * replay + w.distill * distill;
}

}  // namespace kgeu
