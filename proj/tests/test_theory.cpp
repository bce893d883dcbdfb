#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_support.hpp"

using namespace kgeu;
using kgeu::testing::random_model;

namespace {

std::vector<MaskedQuery> all_masked(const KnowledgeGraph& g, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 43);
  std::vector<MaskedQuery> out;
  for (const Triple& t : g.triples()) out.push_back(mask_direction(t, rng));
  return out;
}

}  // namespace

TEST(UnlearnExpectation, ZeroDistancesGiveOneHalf) {
  const EmbeddingModel m(4, 1, 3);
  const std::vector<Triple> f{{0, 0, 1}, {2, 0, 3}};
  EXPECT_EQ(unlearn_expectation(m, f), 0.5);
  EXPECT_THROW(unlearn_expectation(m, std::vector<Triple>{}), DomainError);
}

TEST(UnlearnExpectation, MatchesDirectMean) {
  const EmbeddingModel m = random_model(8, 2, 3, 1, 0.5);
  const KnowledgeGraph g = random_graph(8, 2, 10, 1);
  double s = 0.0;
  for (const Triple& t : g.triples()) s += 1.0 / (1.0 + std::exp(distance(m, t)));
  EXPECT_NEAR(unlearn_expectation(m, g.triples().view()), s / 10.0, 1e-15);
  EXPECT_EQ(unlearn_expectation(m, std::vector<Triple>{g.triples()[3]}), score(m, g.triples()[3]));
}

TEST(PreferenceExpectation, ConstantScoresCancel) {
  const EmbeddingModel m(12, 2, 3);
  const KnowledgeGraph g = random_graph(12, 2, 10, 2);
  const auto q = all_masked(g, 2);
  EXPECT_EQ(preference_expectation_exact(m, g, q, PreferredSampling::uniform), 0.0);
  EXPECT_EQ(preference_expectation_exact(m, g, q, PreferredSampling::out_boundary), 0.0);
}

TEST(PreferenceExpectation, TwoEntitiesUseTheOtherOne) {
  const KnowledgeGraph g({"a", "b"}, {"r"}, std::vector<Triple>{{0, 0, 1}, {1, 0, 1}});
  const EmbeddingModel m = random_model(2, 1, 2, 4);
  const std::vector<MaskedQuery> q{mask_with({0, 0, 1}, MaskDirection::tail), mask_with({1, 0, 1}, MaskDirection::head)};
  const double expected = 0.5 * ((score(m, {0, 0, 1}) - score(m, {0, 0, 0})) + (score(m, {1, 0, 1}) - score(m, {0, 0, 1})));
  EXPECT_NEAR(preference_expectation_exact(m, g, q, PreferredSampling::uniform), expected, 1e-15);
}

// Oracle: nested loops over queries and every entity with the membership
// test written out, no shared helpers.
TEST(PreferenceExpectation, MatchesNestedLoopEnumeration) {
  const KnowledgeGraph g = random_graph(6, 2, 10, 5);
  const EmbeddingModel m = random_model(6, 2, 3, 6, 0.6);
  const auto qs = all_masked(g, 5);
  for (PreferredSampling mode : {PreferredSampling::uniform, PreferredSampling::out_boundary}) {
    double total = 0.0;
    for (const MaskedQuery& q : qs) {
      double inner = 0.0;
      int count = 0;
      for (EntityId y = 0; y < 6; ++y) {
        if (y == q.dispreferred) continue;
        bool neighbour = false;
        for (const Triple& t : g.triples())
          neighbour |= (t.head == q.dispreferred && t.tail == y) || (t.tail == q.dispreferred && t.head == y);
        if (mode == PreferredSampling::out_boundary && neighbour) continue;
        inner += score(m, q.complete(y));
        ++count;
      }
      total += score(m, q.complete(q.dispreferred)) - inner / count;
    }
    EXPECT_NEAR(preference_expectation_exact(m, g, qs, mode), total / qs.size(), 1e-15);
  }
}

TEST(TheoremOne, ConstantsAndExactResidual) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KnowledgeGraph g = random_graph(6, 2, 10, seed);
    const EmbeddingModel m = random_model(6, 2, 4, seed + 100, 0.5);
    const TheoremCheck c = verify_theorem1(m, g, all_masked(g, seed));
    EXPECT_DOUBLE_EQ(c.c1, 6.0 / 5.0);
    EXPECT_LT(c.residual, 1e-12);
    EXPECT_TRUE(c.bounds_hold());
  }
  const KnowledgeGraph five = random_graph(5, 1, 6, 1);
  EXPECT_DOUBLE_EQ(verify_theorem1(random_model(5, 1, 2, 1), five, all_masked(five, 1)).c1, 1.25);
}

TEST(TheoremOne, PerturbedConstantBreaksIdentity) {
  const KnowledgeGraph g = random_graph(6, 2, 10, 3);
  const EmbeddingModel m = random_model(6, 2, 4, 3, 0.5);
  EXPECT_GT(verify_theorem1(m, g, all_masked(g, 3), 0.01).residual, 1e-6);
}

TEST(TheoremTwo, IsolatedTargetsReduceToUniform) {
  // Self-loops only: every boundary is {y_l} itself.
  std::vector<Triple> loops;
  for (EntityId e = 0; e < 4; ++e) loops.push_back({e, 0, e});
  const KnowledgeGraph g(numbered_names("e", 7), {"r"}, loops);
  const EmbeddingModel m = random_model(7, 1, 3, 9, 0.5);
  const auto qs = all_masked(g, 1);
  const TheoremCheck two = verify_theorem2(m, g, qs);
  const TheoremCheck one = verify_theorem1(m, g, qs);
  EXPECT_LT(two.residual, 1e-12);
  EXPECT_LT(std::abs(two.e_p - one.e_p), 1e-15);
  EXPECT_LT(two.affine_gap, 1e-12);
  EXPECT_EQ(two.approximation_gap, 0.0);
}

// Hand derivation: the dropped term is the mean over queries of the boundary
// neighbours' scores, divided by |E| - 1.
TEST(TheoremTwo, ApproximationGapIsBoundaryTermOverEminusOne) {
  const std::vector<Triple> edges{{0, 0, 1}, {0, 0, 2}, {3, 0, 4}, {3, 0, 5}, {1, 0, 1}};
  const KnowledgeGraph g(numbered_names("e", 6), {"r"}, edges);
  const EmbeddingModel m = random_model(6, 1, 3, 12, 0.5);
  const std::vector<MaskedQuery> qs{mask_with({0, 0, 1}, MaskDirection::head), mask_with({3, 0, 4}, MaskDirection::head)};
  // e0 neighbours {1, 2}; e3 neighbours {4, 5}.
  const double b0 = score(m, {1, 0, 1}) + score(m, {2, 0, 1});
  const double b3 = score(m, {4, 0, 4}) + score(m, {5, 0, 4});
  const TheoremCheck c = verify_theorem2(m, g, qs);
  EXPECT_NEAR(c.approximation_gap, 0.5 * (b0 + b3) / 5.0, 1e-15);
  EXPECT_LT(c.residual, 1e-12);
  EXPECT_TRUE(c.bounds_hold());
}

TEST(TheoremTwo, RandomInstancesHaveExactResidual) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TheoryInstance inst = theory_instance(12, 3, 20, 8, 4, seed);
    const TheoremCheck c = verify_theorem2(inst.model, inst.graph, inst.queries);
    EXPECT_LT(c.residual, 1e-12);
    EXPECT_TRUE(c.bounds_hold());
    EXPECT_GE(c.approximation_gap, 0.0);
  }
}

TEST(TheoremTwo, FullyConnectedTargetIsDomainError) {
  const KnowledgeGraph g({"a", "b"}, {"r"}, std::vector<Triple>{{0, 0, 1}});
  const EmbeddingModel m = random_model(2, 1, 2, 1);
  const std::vector<MaskedQuery> qs{mask_with({0, 0, 1}, MaskDirection::head)};
  EXPECT_THROW(verify_theorem2(m, g, qs), DomainError);
}

TEST(TheoremTwo, GapsShrinkAsEntitiesGrow) {
  double prev_gap = 1e9, prev_affine = 1e9;
  for (std::size_t n : {10u, 100u, 1000u}) {
    const TheoryInstance inst = boundary_sweep_instance(n, 3, 4, 7);
    const TheoremCheck c = verify_theorem2(inst.model, inst.graph, inst.queries);
    EXPECT_LT(c.residual, 1e-12);
    EXPECT_LT(c.approximation_gap, prev_gap);
    EXPECT_LT(c.affine_gap, prev_affine);
    prev_gap = c.approximation_gap;
    prev_affine = c.affine_gap;
  }
}

TEST(MonteCarlo, SamplerAgreesWithEnumeration) {
  const TheoryInstance inst = theory_instance(30, 3, 40, 10, 4, 2);
  for (PreferredSampling mode : {PreferredSampling::uniform, PreferredSampling::out_boundary}) {
    const double exact = preference_expectation_exact(inst.model, inst.graph, inst.queries, mode);
    const MonteCarloEstimate mc =
        preference_expectation_sampled(inst.model, inst.graph, inst.queries, mode, 20000, 3);
    EXPECT_GT(mc.standard_error, 0.0);
    EXPECT_LE(std::abs(mc.estimate - exact), 4.0 * mc.standard_error);
    EXPECT_EQ(mc.draws, 200000u);
  }
}

TEST(TheoremCheck, JsonCarriesEveryField) {
  const TheoryInstance inst = theory_instance(8, 2, 12, 4, 3, 1);
  const auto j = to_json(verify_theorem2(inst.model, inst.graph, inst.queries));
  for (const char* key : {"entities", "samples", "e_u", "e_p", "c1", "c2", "residual", "c2_corrected",
                          "approximation_gap", "affine_gap", "bounds_hold"})
    EXPECT_TRUE(j.contains(key)) << key;
}
