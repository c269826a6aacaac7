#include <gtest/gtest.h>

#include "kgwalk/beam.hpp"
#include "oracles.hpp"

using namespace kgwalk;

TEST(Beam, WidthOneIsGreedy) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int ne = 3 + static_cast<int>(rng.below(5));
    Graph g(ne, 2, oracle::random_facts(rng, ne, 2, 0.25));
    WalkEnv env(g, {.horizon = 3});
    auto p = init_policy(g, {.entity_dim = 4, .hidden_dim = 4}, rng.child("p"));
    Query q{static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(2)), std::nullopt};
    auto s = env.reset(q);
    auto w = initial_walker(p, g);
    double score = 0.0;
    for (int t = 0; t < 3; ++t) {
      StepCache c;
      policy_step(p, w, s.current, q.relation, env.actions(s), c);
      const auto a = static_cast<std::size_t>(std::max_element(c.log_probs.begin(), c.log_probs.end()) -
                                              c.log_probs.begin());
      score += c.log_probs[a];
      w = advance(c, a);
      s = env.step(s, a);
    }
    auto ranked = beam_decode(p, env, q, 1);
    ASSERT_EQ(ranked.size(), 1u);
    EXPECT_EQ(ranked[0].entity, s.current);
    EXPECT_EQ(ranked[0].score, score);
  }
}

TEST(Beam, WideBeamEqualsExhaustiveEnumeration) {
  Rng rng(22);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int ne = 3 + static_cast<int>(rng.below(3));
    Graph g(ne, 2, oracle::random_facts(rng, ne, 2, 0.2));
    WalkEnv env(g, {.horizon = 2});
    auto p = init_policy(g, {.entity_dim = 3, .hidden_dim = 3}, rng.child("p"));
    oracle::randomize(p, rng, 1.0);
    Query q{static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(2)), std::nullopt};
    const auto n = oracle::count_paths(env, q);
    auto beam = beam_decode(p, env, q, static_cast<std::int32_t>(n));
    auto exact = oracle::rank_by_enumeration(oracle::enumerate_paths(p, env, q));
    ASSERT_EQ(beam.size(), exact.size());
    for (std::size_t i = 0; i < beam.size(); ++i) {
      EXPECT_EQ(beam[i].entity, exact[i].first);
      EXPECT_EQ(beam[i].score, exact[i].second);
    }
    ++compared;
  }
  EXPECT_EQ(compared, 40);
}

TEST(Beam, ScoresAreNonIncreasingAndEntitiesUnique) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int ne = 4 + static_cast<int>(rng.below(6));
    Graph g(ne, 3, oracle::random_facts(rng, ne, 3, 0.2));
    WalkEnv env(g, {.horizon = 3});
    auto p = init_policy(g, {.entity_dim = 4, .hidden_dim = 4}, rng.child("p"));
    auto r = beam_decode(p, env, {0, 0, std::nullopt}, 5);
    std::vector<EntityId> seen;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0) EXPECT_LE(r[i].score, r[i - 1].score);
      EXPECT_LE(r[i].score, 0.0);
      seen.push_back(r[i].entity);
    }
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
    EXPECT_LE(r.size(), 5u);
  }
}

TEST(Beam, TiesBreakByEntityId) {
  std::vector<RankedEntity> r{{3, -1.0}, {1, -1.0}, {2, -0.5}, {1, -2.0}};
  auto best = best_per_entity(r);
  ASSERT_EQ(best.size(), 3u);
  EXPECT_EQ(best[0], (RankedEntity{2, -0.5}));
  EXPECT_EQ(best[1], (RankedEntity{1, -1.0}));
  EXPECT_EQ(best[2], (RankedEntity{3, -1.0}));
  EXPECT_THROW(beam_decode(PolicyParams{}, WalkEnv(Graph(1, 1, {}), {}), {0, 0, std::nullopt}, 0), Error);
}
