#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace kgeu;

TEST(SampleNegative, TwoEntitiesForcesTheOtherOne) {
  Rng rng = derive_rng(1, 0);
  for (int i = 0; i < 200; ++i) {
    const Triple n = sample_negative(2, {0, 0, 1}, rng);
    if (n.head != 0) {
      EXPECT_EQ(n, (Triple{1, 0, 1}));
    } else {
      EXPECT_EQ(n, (Triple{0, 0, 0}));
    }
  }
}

TEST(SampleNegative, ChangesExactlyOneEntitySlot) {
  Rng rng = derive_rng(2, 0);
  for (int i = 0; i < 5000; ++i) {
    const Triple t{static_cast<EntityId>(i % 13), 3, static_cast<EntityId>((i * 7) % 13)};
    const Triple n = sample_negative(13, t, rng);
    EXPECT_EQ(n.relation, t.relation);
    EXPECT_EQ((n.head != t.head) + (n.tail != t.tail), 1);
    EXPECT_LT(n.head, 13u);
    EXPECT_LT(n.tail, 13u);
  }
}

// Binomial oracle: head-corruption frequency within 3 sigma of 1/2.
TEST(SampleNegative, CorruptedSlotIsFairCoin) {
  Rng rng = derive_rng(3, 0);
  const int n = 100000;
  int heads = 0;
  for (int i = 0; i < n; ++i) heads += sample_negative(50, {4, 0, 9}, rng).head != 4;
  EXPECT_LE(std::abs(heads - n / 2.0), 3.0 * std::sqrt(n * 0.25));
}

TEST(SampleNegative, SingleEntityIsSamplingError) {
  Rng rng = derive_rng(0, 0);
  EXPECT_THROW(sample_negative(1, {0, 0, 0}, rng), SamplingError);
}

TEST(PretrainConfig, DefaultsAreAcceptedAndBadValuesRejected) {
  const PretrainConfig c;
  EXPECT_EQ(c.dim, 200u);
  EXPECT_EQ(c.margin, 8.0);
  EXPECT_NO_THROW(c.validate());
  PretrainConfig bad = c;
  bad.margin = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.learning_rate = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Pretrain, LossMostlyDecreasesOverFirstEpochs) {
  const KnowledgeGraph g = random_graph(40, 3, 100, 5);
  PretrainConfig c;
  c.dim = 16;
  c.epochs = 5;
  c.batch_size = 20;
  c.learning_rate = 1e-2;
  c.seed = 7;
  std::vector<double> losses;
  MarginTrainingOptions o;
  o.on_epoch = [&](std::size_t, double l) { losses.push_back(l); };
  pretrain(g, c, o);
  ASSERT_EQ(losses.size(), 5u);
  int increases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] > losses[i - 1];
  EXPECT_LE(increases, 1);
}

TEST(Pretrain, EntityRowsUnitNormAfterEveryUpdate) {
  const KnowledgeGraph g = random_graph(30, 2, 60, 1);
  PretrainConfig c;
  c.dim = 8;
  c.epochs = 3;
  c.batch_size = 16;
  c.learning_rate = 1e-2;
  std::size_t updates = 0;
  double worst = 0.0;
  MarginTrainingOptions o;
  o.after_update = [&](const EmbeddingModel& m) {
    ++updates;
    for (Eigen::Index e = 0; e < m.entities().rows(); ++e) worst = std::max(worst, std::abs(m.entities().row(e).norm() - 1.0));
  };
  pretrain(g, c, o);
  EXPECT_EQ(updates, 3u * 4u);
  EXPECT_LT(worst, 1e-9);
}

// Oracle: the same architecture with its entity rows shuffled, which keeps
// the parameter distribution but destroys the learned alignment.
TEST(Pretrain, FilteredTrainMrrBeatsShuffledModelTwentyfold) {
  const KnowledgeGraph g = random_graph(1000, 300, 3000, 1);
  PretrainConfig c;
  c.dim = 32;
  c.epochs = 150;
  c.batch_size = 128;
  c.margin = 1.0;
  c.learning_rate = 3e-3;
  c.seed = 3;
  const EmbeddingModel m = pretrain(g, c);
  const Evaluator ev(g.triples());
  EmbeddingModel shuffled = m;
  std::vector<std::size_t> perm(g.num_entities());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = derive_rng(12, 0);
  shuffle_in_place(perm, rng);
  for (std::size_t e = 0; e < perm.size(); ++e) shuffled.entities().row(static_cast<Eigen::Index>(e)) = m.entities().row(static_cast<Eigen::Index>(perm[e]));
  const double trained = ev.mrr(m, g.triples());
  const double baseline = ev.mrr(shuffled, g.triples());
  EXPECT_GT(trained, 20.0 * baseline) << trained << " vs " << baseline;
}

TEST(Pretrain, SameSeedIsBitIdentical) {
  const KnowledgeGraph g = random_graph(25, 3, 70, 2);
  PretrainConfig c;
  c.dim = 6;
  c.epochs = 4;
  c.batch_size = 10;
  c.seed = 11;
  EXPECT_TRUE(pretrain(g, c).identical_to(pretrain(g, c)));
  PretrainConfig d = c;
  d.seed = 12;
  EXPECT_FALSE(pretrain(g, c).identical_to(pretrain(g, d)));
}

TEST(Pretrain, NegativesPerPositiveMultipliesPairs) {
  const KnowledgeGraph g = random_graph(20, 2, 30, 3);
  PretrainConfig c;
  c.dim = 4;
  c.epochs = 1;
  c.negatives_per_positive = 3;
  EXPECT_NO_THROW(pretrain(g, c));
  c.negatives_per_positive = 0;
  EXPECT_THROW(pretrain(g, c), ConfigError);
}

TEST(Pretrain, DivergenceIsTrainingErrorWithEpoch) {
  const KnowledgeGraph g = random_graph(10, 1, 20, 3);
  EmbeddingModel m = init_model(g.num_entities(), g.num_relations(), 4, 0);
  m.relations()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  PretrainConfig c;
  c.dim = 4;
  c.epochs = 2;
  try {
    train_margin(m, g.triples().view(), c);
    FAIL() << "no error";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1u);
    EXPECT_EQ(e.exit_code(), 3);
  }
}
