#include <gtest/gtest.h>

#include <numeric>

#include "kgwalk/reinforce.hpp"
#include "oracles.hpp"

using namespace kgwalk;

namespace {

struct Fixture {
  ParsedTriples kg = oracle::four_entity_kg();
  Graph graph = build_graph(kg.entities, kg.relations, kg.triples);
};

std::vector<Matrix*> ptrs(PolicyParams& p) {
  auto a = p.tensors();
  return {a.begin(), a.end()};
}

std::vector<const Matrix*> cptrs(const PolicyParams& p) {
  auto a = p.tensors();
  return {a.begin(), a.end()};
}

}  // namespace

TEST(Policy, ZeroParametersGiveUniformDistribution) {
  Fixture fx;
  WalkEnv env(fx.graph, {.horizon = 2});
  auto p = init_policy(fx.graph, {.entity_dim = 4, .hidden_dim = 5}, Rng(1));
  p.zero();
  auto s = env.reset({0, 0, std::nullopt});
  auto probs = action_distribution(p, env, s, initial_walker(p, fx.graph));
  ASSERT_EQ(probs.size(), env.actions(s).size());
  for (double x : probs) EXPECT_DOUBLE_EQ(x, 1.0 / static_cast<double>(probs.size()));
}

TEST(Policy, SingleActionHasProbabilityOne) {
  auto kg = parse_triples("A\tr\tB\n");
  Graph g(kg.entities.size(), kg.relations.size(), kg.triples, {.self_loops = true, .inverses = false});
  WalkEnv env(g, {.horizon = 1});
  auto p = init_policy(g, {.entity_dim = 3, .hidden_dim = 3}, Rng(2));
  auto s = env.reset({1, 0, std::nullopt});
  auto probs = action_distribution(p, env, s, initial_walker(p, g));
  EXPECT_EQ(probs, std::vector<double>{1.0});
}

TEST(Softmax, ShiftInvariantAndNormalised) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(1 + rng.below(10)), shifted;
    for (auto& x : z) x = rng.uniform(-50, 50);
    const double c = rng.uniform(-1000, 1000);
    for (double x : z) shifted.push_back(x + c);
    std::vector<double> p1, lp1, p2, lp2;
    softmax(z, p1, lp1);
    softmax(shifted, p2, lp2);
    EXPECT_NEAR(std::accumulate(p1.begin(), p1.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < z.size(); ++i) {
      EXPECT_GE(p1[i], 0.0);
      EXPECT_NEAR(p1[i], p2[i], 1e-9);
      EXPECT_NEAR(std::exp(lp1[i]), p1[i], 1e-12);
    }
  }
}

TEST(Policy, DistributionsSumToOneOnRandomGraphs) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int ne = 2 + static_cast<int>(rng.below(6)), nr = 1 + static_cast<int>(rng.below(3));
    Graph g(ne, nr, oracle::random_facts(rng, ne, nr, 0.25));
    WalkEnv env(g, {.horizon = 3});
    auto p = init_policy(g, {.entity_dim = 4, .hidden_dim = 4}, rng.child("p"));
    rng = Rng(rng.next_u64());
    auto s = env.reset({static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(nr)), std::nullopt});
    auto w = initial_walker(p, g);
    for (int t = 0; t < 3; ++t) {
      StepCache c;
      policy_step(p, w, s.current, s.query.relation, env.actions(s), c);
      EXPECT_NEAR(std::accumulate(c.probs.begin(), c.probs.end(), 0.0), 1.0, 1e-12);
      const auto a = rng.below(c.actions.size());
      w = advance(c, a);
      s = env.step(s, a);
    }
  }
}

TEST(Rollout, LengthAndDeterminism) {
  Fixture fx;
  WalkEnv env(fx.graph, {.horizon = 3});
  auto p = init_policy(fx.graph, {.entity_dim = 4, .hidden_dim = 4}, Rng(5));
  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    Query q{static_cast<EntityId>(i % 4), static_cast<RelationId>(i % 2), std::nullopt};
    auto t1 = sample_trajectory(p, env, q, a);
    auto t2 = sample_trajectory(p, env, q, b);
    EXPECT_EQ(t1.actions.size(), 3u);
    EXPECT_EQ(t1.path.size(), 3u);
    EXPECT_EQ(t1.actions, t2.actions);
    EXPECT_EQ(t1.end, t2.end);
    EXPECT_EQ(t1.reward, t2.reward);
    EXPECT_EQ(t1.path.back().target, t1.end);
  }
}

TEST(ReinforceGradient, MatchesCentralDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int ne = 3 + static_cast<int>(rng.below(4)), nr = 1 + static_cast<int>(rng.below(2));
    Graph g(ne, nr, oracle::random_facts(rng, ne, nr, 0.3));
    WalkEnv env(g, {.horizon = 2});
    auto p = init_policy(g, {.entity_dim = 1 + static_cast<int>(rng.below(4)), .hidden_dim = 1 + static_cast<int>(rng.below(4))},
                         rng.child("init"));
    oracle::randomize(p, rng, 0.8);
    std::vector<Trajectory> batch;
    for (int b = 0; b < 4; ++b) {
      Query q{static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(nr)), std::nullopt};
      auto tr = sample_trajectory(p, env, q, rng);
      tr.reward = rng.uniform();
      batch.push_back(tr);
    }
    auto grad = p.zeros_like();
    reinforce_gradient(p, env, batch, 0.3, 0.05, &grad);
    auto check = oracle::compare_with_central_differences(
        ptrs(p), cptrs(grad), [&] { return reinforce_gradient(p, env, batch, 0.3, 0.05, nullptr); });
    EXPECT_LT(check.max_rel_error, 1e-4) << "trial " << trial;
  }
}

TEST(ReinforceUpdate, RewardEqualToBaselineWithoutEntropyLeavesParameters) {
  Fixture fx;
  WalkEnv env(fx.graph, {.horizon = 2});
  AgentConfig cfg{.policy = {.entity_dim = 3, .hidden_dim = 3}, .horizon = 2, .entropy_weight = 0.0,
                  .batch = 4, .rollouts_per_query = 1};
  auto s = init_train_state(fx.graph, cfg);
  s.baseline = 0.5;
  std::vector<Trajectory> batch;
  Rng rng(3);
  for (int i = 0; i < 4; ++i) {
    auto tr = sample_trajectory(s.params, env, {0, 0, std::nullopt}, rng);
    tr.reward = 0.5;
    batch.push_back(tr);
  }
  auto before = s.params;
  auto st = reinforce_update(s, env, batch, cfg);
  EXPECT_EQ(st.grad_norm, 0.0);
  EXPECT_TRUE(s.params == before);
  EXPECT_DOUBLE_EQ(s.baseline, 0.5);
}

TEST(ReinforceUpdate, BaselineIsExponentialMovingAverage) {
  Fixture fx;
  WalkEnv env(fx.graph, {.horizon = 2});
  AgentConfig cfg{.policy = {.entity_dim = 3, .hidden_dim = 3}, .horizon = 2, .baseline_decay = 0.9,
                  .batch = 2, .rollouts_per_query = 1};
  auto s = init_train_state(fx.graph, cfg);
  Rng rng(3);
  std::vector<Trajectory> batch{sample_trajectory(s.params, env, {0, 0, std::nullopt}, rng),
                                sample_trajectory(s.params, env, {0, 0, std::nullopt}, rng)};
  batch[0].reward = 1.0;
  batch[1].reward = 0.0;
  reinforce_update(s, env, batch, cfg);
  EXPECT_NEAR(s.baseline, 0.1 * 0.5, 1e-15);
}

TEST(ReinforceUpdate, DeterministicTraining) {
  Fixture fx;
  WalkEnv env(fx.graph, {.horizon = 2});
  AgentConfig cfg{.policy = {.entity_dim = 4, .hidden_dim = 4}, .horizon = 2, .batch = 8, .rollouts_per_query = 2,
                  .seed = 17};
  std::vector<Query> queries;
  for (const auto& t : fx.graph.facts()) queries.push_back(to_query(t));
  auto a = init_train_state(fx.graph, cfg), b = init_train_state(fx.graph, cfg);
  for (int e = 0; e < 10; ++e) {
    train_epoch(a, env, queries, cfg);
    train_epoch(b, env, queries, cfg);
  }
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.baseline, b.baseline);
  EXPECT_EQ(a.epoch, 10);
}

TEST(EntropyWeight, DecaysEveryInterval) {
  AgentConfig cfg{.entropy_weight = 0.02, .entropy_decay = 0.9, .entropy_decay_every = 50};
  EXPECT_DOUBLE_EQ(current_entropy_weight(cfg, 0), 0.02);
  EXPECT_DOUBLE_EQ(current_entropy_weight(cfg, 49), 0.02);
  EXPECT_DOUBLE_EQ(current_entropy_weight(cfg, 50), 0.02 * 0.9);
  EXPECT_DOUBLE_EQ(current_entropy_weight(cfg, 120), 0.02 * 0.81);
}

TEST(AgentConfig, Validation) {
  EXPECT_THROW(validate(AgentConfig{.batch = 10, .rollouts_per_query = 3}), Error);
  EXPECT_THROW(validate(AgentConfig{.horizon = 0}), Error);
  EXPECT_NO_THROW(validate(AgentConfig{}));
}
