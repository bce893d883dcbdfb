#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace kgeu;
using kgeu::testing::check_gradient;
using kgeu::testing::random_model;

namespace {

constexpr double kGradTolerance = 1e-4;

std::vector<Triple> some_triples(std::size_t ne, std::size_t nr, std::size_t n, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0);
  std::vector<Triple> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({static_cast<EntityId>(uniform_index(rng, ne)), static_cast<RelationId>(uniform_index(rng, nr)),
                   static_cast<EntityId>(uniform_index(rng, ne))});
  }
  return out;
}

std::vector<PreferenceSample> some_samples(std::size_t ne, std::size_t nr, std::size_t n, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 1);
  std::vector<PreferenceSample> out;
  for (const Triple& t : some_triples(ne, nr, n, seed)) {
    const MaskedQuery q = mask_direction(t, rng);
    out.push_back(q.with_preferred(static_cast<EntityId>((q.dispreferred + 1 + uniform_index(rng, ne - 1)) % ne)));
  }
  return out;
}

EmbeddingModel perturbed(const EmbeddingModel& m, double scale, std::uint64_t seed) {
  EmbeddingModel out = m;
  const EmbeddingModel noise = random_model(m.num_entities(), m.num_relations(), m.dim(), seed, scale);
  out.entities() += noise.entities();
  out.relations() += noise.relations();
  return out;
}

}  // namespace

TEST(MarginRankingLoss, GradientMatchesFiniteDifferences) {
  const EmbeddingModel m = random_model(8, 3, 5, 1);
  const auto pos = some_triples(8, 3, 6, 2), neg = some_triples(8, 3, 6, 3);
  const auto r = check_gradient(
      m, [&](const EmbeddingModel& x) { return margin_ranking_loss(x, pos, neg, 8.0); },
      [&](const EmbeddingModel& x, Gradients& g) { margin_ranking_loss(x, pos, neg, 8.0, &g, 1.0); });
  EXPECT_LT(r.max_rel_error, kGradTolerance);
  EXPECT_EQ(r.coordinates, (8u + 3u) * 5u);
}

TEST(MarginRankingLoss, HingeBoundaries) {
  EmbeddingModel m(3, 1, 1);
  m.entities()(1, 0) = 0.0;
  m.entities()(2, 0) = 8.0;
  const std::vector<Triple> pos{{0, 0, 1}}, neg{{0, 0, 2}};
  EXPECT_EQ(margin_ranking_loss(m, pos, neg, 8.0), 0.0);
  m.entities()(2, 0) = 3.0;
  EXPECT_DOUBLE_EQ(margin_ranking_loss(m, pos, neg, 8.0), 5.0);
  EXPECT_THROW(margin_ranking_loss(m, pos, std::vector<Triple>{}, 8.0), DomainError);
}

// Oracle: hinge recomputed from elementwise distances.
TEST(MarginRankingLoss, MatchesDirectRecomputation) {
  const EmbeddingModel m = random_model(10, 2, 6, 4);
  const auto pos = some_triples(10, 2, 12, 5), neg = some_triples(10, 2, 12, 6);
  auto dist = [&](const Triple& t) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < 6; ++j) {
      const double x = m.entities()(t.head, j) + m.relations()(t.relation, j) - m.entities()(t.tail, j);
      s += x * x;
    }
    return std::sqrt(s);
  };
  double expected = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) expected += std::max(0.0, dist(pos[i]) - dist(neg[i]) + 8.0);
  EXPECT_NEAR(margin_ranking_loss(m, pos, neg, 8.0), expected / 12.0, 1e-12);
}

TEST(ScoreMarginLoss, GradientMatchesFiniteDifferences) {
  const EmbeddingModel m = random_model(8, 3, 5, 7, 0.3);
  const auto pos = some_triples(8, 3, 6, 8), neg = some_triples(8, 3, 6, 9);
  const auto r = check_gradient(
      m, [&](const EmbeddingModel& x) { return score_margin_loss(x, pos, neg, 1.0); },
      [&](const EmbeddingModel& x, Gradients& g) { score_margin_loss(x, pos, neg, 1.0, &g, 1.0); });
  EXPECT_LT(r.max_rel_error, kGradTolerance);
}

TEST(ScoreMarginLoss, SaturatesAtLargeMargin) {
  const EmbeddingModel m = random_model(8, 3, 5, 7);
  const auto pos = some_triples(8, 3, 6, 8), neg = some_triples(8, 3, 6, 9);
  double expected = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) expected += score(m, pos[i]) - score(m, neg[i]) + 8.0;
  EXPECT_NEAR(score_margin_loss(m, pos, neg, 8.0), expected / 6.0, 1e-12);
}

TEST(DpoSampleLoss, IdenticalModelsGiveLn2) {
  EXPECT_NEAR(dpo_sample_loss(0.0, 0.0, 1.0), std::log(2.0), 1e-12);
  EXPECT_NEAR(dpo_sample_loss_from_scores(0.3, 0.3, 0.7, 0.7, 2.5), std::log(2.0), 1e-12);
  const EmbeddingModel m = random_model(6, 2, 4, 1);
  const auto samples = some_samples(6, 2, 10, 2);
  EXPECT_NEAR(dpo_loss(m, m, samples, 1.0), std::log(2.0), 1e-12);
}

TEST(DpoSampleLoss, ZeroBetaGivesLn2) {
  EXPECT_NEAR(dpo_sample_loss_from_scores(0.9, 0.1, 0.05, 0.6, 0.0), std::log(2.0), 1e-15);
  const EmbeddingModel m = random_model(6, 2, 4, 1);
  const EmbeddingModel ref = perturbed(m, 0.5, 3);
  EXPECT_NEAR(dpo_loss(m, ref, some_samples(6, 2, 10, 2), 0.0), std::log(2.0), 1e-15);
}

TEST(DpoSampleLoss, HandComputedExample) {
  // inner = ln(0.8/0.4) - ln(0.2/0.4) = ln 4; -ln sigmoid(ln 4) = -ln 0.8.
  EXPECT_NEAR(dpo_sample_loss_from_scores(0.8, 0.4, 0.2, 0.4, 1.0), -std::log(0.8), 1e-12);
  EXPECT_NEAR(dpo_sample_loss_from_scores(0.8, 0.4, 0.2, 0.4, 1.0), 0.223144, 1e-6);
}

TEST(DpoLoss, GradientMatchesFiniteDifferences) {
  const EmbeddingModel ref = random_model(8, 3, 5, 10, 0.5);
  const EmbeddingModel m = perturbed(ref, 0.2, 11);
  const auto samples = some_samples(8, 3, 7, 12);
  for (double beta : {0.5, 1.0, 3.0}) {
    const auto r = check_gradient(
        m, [&](const EmbeddingModel& x) { return dpo_loss(x, ref, samples, beta); },
        [&](const EmbeddingModel& x, Gradients& g) { dpo_loss(x, ref, samples, beta, &g, 1.0); });
    EXPECT_LT(r.max_rel_error, kGradTolerance) << "beta " << beta;
  }
}

// The first gradient step pushes the dis-preferred distance up and the
// preferred distance down.
TEST(DpoLoss, GradientDirectionSeparatesPreferences) {
  const EmbeddingModel m = random_model(5, 1, 4, 20, 0.5);
  const std::vector<PreferenceSample> s{mask_with({0, 0, 1}, MaskDirection::tail).with_preferred(3)};
  Gradients g(m);
  dpo_loss(m, m, s, 1.0, &g, 1.0);
  EmbeddingModel stepped = m;
  stepped.entities() -= 1e-3 * g.entity();
  stepped.relations() -= 1e-3 * g.relation();
  EXPECT_GT(distance(stepped, {0, 0, 1}), distance(m, {0, 0, 1}));
  EXPECT_LT(distance(stepped, {0, 0, 3}), distance(m, {0, 0, 3}));
  EXPECT_LT(dpo_loss(stepped, m, s, 1.0), std::log(2.0));
}

TEST(DistillLoss, GradientMatchesFiniteDifferences) {
  const EmbeddingModel ref = random_model(8, 2, 5, 30);
  const EmbeddingModel m = perturbed(ref, 1.2, 31);
  const std::vector<EntityId> ids{0, 2, 3, 7};
  const auto r = check_gradient(
      m, [&](const EmbeddingModel& x) { return distill_loss(x, ref, ids); },
      [&](const EmbeddingModel& x, Gradients& g) { distill_loss(x, ref, ids, &g, 1.0); });
  EXPECT_LT(r.max_rel_error, kGradTolerance);
}

TEST(DistillLoss, LinearAndQuadraticBranches) {
  const EmbeddingModel ref(2, 1, 4);
  EmbeddingModel m = ref;
  m.entities().row(0).setConstant(2.0);
  const std::vector<EntityId> one{0};
  EXPECT_DOUBLE_EQ(distill_loss(m, ref, one), 1.5);
  m.entities().row(0).setConstant(-0.5);
  EXPECT_DOUBLE_EQ(distill_loss(m, ref, one), 0.125);
  EXPECT_EQ(distill_loss(ref, ref, one), 0.0);
  EXPECT_EQ(smooth_l1(1.0), 0.5);
  EXPECT_EQ(smooth_l1(-3.0), 2.5);
}

TEST(TotalLoss, WeightedSum) {
  LossWeights w;
  EXPECT_EQ(total_loss(w, 1.0, 2.0, 3.0), 6.0);
  w.dpo = 0.5;
  w.replay = 0.0;
  w.distill = 2.0;
  EXPECT_EQ(total_loss(w, 1.0, 2.0, 3.0), 6.5);
  w.replay = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(WeightedGradients, ScaleLinearly) {
  const EmbeddingModel ref = random_model(6, 2, 3, 40, 0.5);
  const EmbeddingModel m = perturbed(ref, 0.3, 41);
  const auto samples = some_samples(6, 2, 5, 42);
  Gradients a(m), b(m);
  dpo_loss(m, ref, samples, 1.0, &a, 1.0);
  dpo_loss(m, ref, samples, 1.0, &b, 2.5);
  EXPECT_LT((b.entity() - 2.5 * a.entity()).cwiseAbs().maxCoeff(), 1e-14);
}
