#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "test_support.hpp"

using namespace kgeu;

TEST(AdamUpdate, FirstStepMovesByLearningRateTimesSign) {
  std::vector<double> p{1.0, -2.0, 0.5, 3.0}, g{0.3, -7.0, 1e-3, -0.02}, m(4, 0.0), v(4, 0.0);
  const std::vector<double> start = p;
  adam_update(p, g, m, v, 1, 0.01);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double expected = -0.01 * (g[i] > 0 ? 1.0 : -1.0);
    EXPECT_LT(std::abs((p[i] - start[i]) - expected) / 0.01, 1e-3);
  }
}

TEST(AdamUpdate, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, 2.0}, g{0.0, 0.0}, m(2, 0.0), v(2, 0.0);
  adam_update(p, g, m, v, 1, 0.1);
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
}

TEST(AdamUpdate, NonFiniteGradientIsNumericError) {
  std::vector<double> p{1.0}, g{std::numeric_limits<double>::quiet_NaN()}, m(1, 0.0), v(1, 0.0);
  EXPECT_THROW(adam_update(p, g, m, v, 1, 0.1), NumericError);
  g[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam_update(p, g, m, v, 1, 0.1), NumericError);
}

// Oracle: the textbook recurrences written out by hand for 3 parameters.
TEST(AdamUpdate, MatchesHandRolledReferenceOverTwoSteps) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> p{0.2, -0.4, 1.1}, m(3, 0.0), v(3, 0.0);
  const std::vector<std::vector<double>> grads{{0.5, -1.5, 0.01}, {-0.25, -1.0, 0.3}};
  double hp[3] = {0.2, -0.4, 1.1}, hm[3] = {0, 0, 0}, hv[3] = {0, 0, 0};
  for (int t = 1; t <= 2; ++t) {
    adam_update(p, grads[t - 1], m, v, static_cast<std::uint64_t>(t), lr);
    for (int i = 0; i < 3; ++i) {
      const double g = grads[t - 1][i];
      hm[i] = b1 * hm[i] + (1 - b1) * g;
      hv[i] = b2 * hv[i] + (1 - b2) * g * g;
      const double mhat = hm[i] / (1 - std::pow(b1, t));
      const double vhat = hv[i] / (1 - std::pow(b2, t));
      hp[i] = hp[i] - lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(p[i] - hp[i]), 1e-12);
}

// Dense Adam over every row, zero gradient where nothing was touched.
TEST(AdamState, RowSparseStepsEqualDenseAdam) {
  EmbeddingModel sparse = kgeu::testing::random_model(6, 2, 3, 4);
  EmbeddingModel dense = sparse;
  AdamState state(sparse);
  Gradients g(sparse);
  Table me = Table::Zero(6, 3), ve = Table::Zero(6, 3), mr = Table::Zero(2, 3), vr = Table::Zero(2, 3);
  const std::vector<std::vector<EntityId>> touched{{1, 4}, {2}, {1, 5}, {}};
  for (std::size_t s = 0; s < touched.size(); ++s) {
    g.clear();
    Table ge = Table::Zero(6, 3), gr = Table::Zero(2, 3);
    for (EntityId e : touched[s]) {
      const Eigen::RowVector3d row(0.1 * (e + 1), -0.2 * static_cast<double>(s + 1), 0.05);
      g.entity_row(e) += row;
      ge.row(e) = row;
    }
    if (s % 2 == 0) {
      g.relation_row(1) += Eigen::RowVector3d(0.3, 0.3, -0.1);
      gr.row(1) = Eigen::RowVector3d(0.3, 0.3, -0.1);
    }
    state.step(sparse, g, 0.01);
    adam_update({dense.entities().data(), 18}, {ge.data(), 18}, {me.data(), 18}, {ve.data(), 18}, s + 1, 0.01);
    adam_update({dense.relations().data(), 6}, {gr.data(), 6}, {mr.data(), 6}, {vr.data(), 6}, s + 1, 0.01);
  }
  EXPECT_TRUE(sparse.identical_to(dense));
  EXPECT_EQ(state.steps(), touched.size());
}

TEST(AdamState, UntouchedRowsNeverMove) {
  EmbeddingModel m = kgeu::testing::random_model(4, 1, 2, 9);
  const EmbeddingModel before = m;
  AdamState state(m);
  Gradients g(m);
  g.entity_row(2) += Eigen::RowVector2d(1.0, -1.0);
  state.step(m, g, 0.1);
  for (EntityId e : {0u, 1u, 3u}) EXPECT_EQ(m.entity(e), before.entity(e));
  EXPECT_NE(m.entity(2), before.entity(2));
  EXPECT_EQ(m.relation(0), before.relation(0));
}

TEST(Gradients, ClearResetsTouchedRowsOnly) {
  const EmbeddingModel m(3, 2, 2);
  Gradients g(m);
  g.entity_row(1) += Eigen::RowVector2d(1, 2);
  g.relation_row(0) += Eigen::RowVector2d(3, 4);
  EXPECT_EQ(g.touched_entities().size(), 1u);
  g.clear();
  EXPECT_TRUE(g.touched_entities().empty());
  EXPECT_EQ(g.entity().cwiseAbs().sum(), 0.0);
  EXPECT_EQ(g.relation().cwiseAbs().sum(), 0.0);
}
