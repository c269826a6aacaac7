#pragma once

// REINFORCE with a moving-average baseline and an entropy bonus.
//
//   loss = -(1/B) sum_b (R_b - baseline) sum_t log pi(a_t | s_t)
//          - beta * mean_{b,t} H(pi(. | s_t))
//   baseline <- lambda * baseline + (1 - lambda) * mean_b R_b
//
// One "epoch" is one update on a batch of `batch` rollouts drawn as
// batch / rollouts_per_query queries, cycling through a shuffled pass over
// the training queries.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgwalk/env.hpp"
#include "kgwalk/error.hpp"
#include "kgwalk/policy.hpp"
#include "kgwalk/rng.hpp"
#include "kgwalk/tensor.hpp"

namespace kgwalk {

struct AgentConfig {
  PolicyConfig policy;
  std::int32_t horizon = 3;
  double learning_rate = 1e-3;
  double entropy_weight = 0.02;  // beta
  double entropy_decay = 0.9;
  std::int32_t entropy_decay_every = 50;
  double baseline_decay = 0.95;  // lambda
  std::int32_t epochs = 1000;
  std::int32_t batch = 128;
  std::int32_t rollouts_per_query = 8;
  std::int32_t beam_width = 64;
  std::int32_t eval_every = 100;
  bool hide_query_edge = true;
  std::uint64_t seed = 0;
};

inline void validate(const AgentConfig& c) {
  if (c.horizon <= 0) fail(ErrorKind::Validation, "horizon must be positive");
  if (!(c.learning_rate > 0)) fail(ErrorKind::Validation, "learning rate must be positive");
  if (!(c.entropy_weight >= 0)) fail(ErrorKind::Validation, "entropy weight must be non-negative");
  if (!(c.baseline_decay >= 0 && c.baseline_decay <= 1)) fail(ErrorKind::Validation, "baseline decay must be in [0,1]");
  if (c.epochs < 0) fail(ErrorKind::Validation, "epochs must be non-negative");
  if (c.batch <= 0 || c.rollouts_per_query <= 0 || c.batch % c.rollouts_per_query != 0)
    fail(ErrorKind::Validation, "batch must be a positive multiple of rollouts per query");
  if (c.beam_width <= 0) fail(ErrorKind::Validation, "beam width must be positive");
  if (c.entropy_decay_every <= 0) fail(ErrorKind::Validation, "entropy decay interval must be positive");
}

struct Trajectory {
  Query query;
  std::vector<std::size_t> actions;
  std::vector<Edge> path;
  std::vector<double> log_probs;
  std::vector<double> entropies;
  EntityId end = 0;
  double reward = 0.0;
};

inline Trajectory sample_trajectory(const PolicyParams& p, const WalkEnv& env, const Query& query, Rng& rng) {
  Trajectory tr;
  tr.query = query;
  EpisodeState state = env.reset(query);
  WalkerState walker = initial_walker(p, env.graph());
  StepCache c;
  for (std::int32_t t = 0; t < env.horizon(); ++t) {
    policy_step(p, walker, state.current, query.relation, env.actions(state), c);
    const double u = rng.uniform();
    std::size_t a = c.probs.size() - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < c.probs.size(); ++k) {
      acc += c.probs[k];
      if (u < acc) {
        a = k;
        break;
      }
    }
    tr.actions.push_back(a);
    tr.path.push_back(c.actions[a]);
    tr.log_probs.push_back(c.log_probs[a]);
    tr.entropies.push_back(c.entropy());
    walker = advance(c, a);
    state = env.step(state, a);
  }
  tr.end = state.current;
  tr.reward = env.terminal_reward(state);
  return tr;
}

struct TrainState {
  PolicyParams params;
  Adam optimizer;
  double baseline = 0.0;
  std::int64_t epoch = 0;
  Rng rollout_rng;
  Rng order_rng;
  std::vector<std::size_t> order;  // current pass over training queries
  std::size_t cursor = 0;
};

inline TrainState init_train_state(const Graph& graph, const AgentConfig& cfg) {
  validate(cfg);
  Rng root(cfg.seed);
  TrainState s;
  s.params = init_policy(graph, cfg.policy, root.child("agent.init"));
  s.optimizer.lr = cfg.learning_rate;
  s.rollout_rng = root.child("agent.rollout");
  s.order_rng = root.child("agent.order");
  return s;
}

inline double current_entropy_weight(const AgentConfig& cfg, std::int64_t epoch) {
  return cfg.entropy_weight * std::pow(cfg.entropy_decay, static_cast<double>(epoch / cfg.entropy_decay_every));
}

struct BatchStats {
  double mean_reward = 0.0;
  double loss = 0.0;
  double mean_entropy = 0.0;
  double grad_norm = 0.0;
};

// Gradient of the batch loss at the given baseline; returns the loss value.
inline double reinforce_gradient(const PolicyParams& p, const WalkEnv& env, std::span<const Trajectory> batch,
                                 double baseline, double entropy_weight, PolicyParams* grad) {
  const double B = static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& tr : batch) {
    const double T = static_cast<double>(tr.actions.size());
    loss += trajectory_surrogate(p, env, tr.query, tr.actions, (tr.reward - baseline) / B,
                                 entropy_weight / (B * T), grad);
  }
  return loss;
}

inline BatchStats reinforce_update(TrainState& s, const WalkEnv& env, std::span<const Trajectory> batch,
                                   const AgentConfig& cfg) {
  if (batch.empty()) fail(ErrorKind::Input, "empty trajectory batch");
  const double beta = current_entropy_weight(cfg, s.epoch);
  PolicyParams grad = s.params.zeros_like();
  BatchStats st;
  st.loss = reinforce_gradient(s.params, env, batch, s.baseline, beta, &grad);

  double sq = 0.0;
  for (const auto* m : grad.tensors())
    for (double x : m->data) sq += x * x;
  st.grad_norm = std::sqrt(sq);
  if (!std::isfinite(st.grad_norm))
    fail(ErrorKind::Training, "non-finite policy gradient at epoch " + std::to_string(s.epoch) +
                                  " (loss=" + std::to_string(st.loss) + ")");

  auto params = s.params.tensors();
  auto grads = std::as_const(grad).tensors();
  s.optimizer.lr = cfg.learning_rate;
  s.optimizer.apply(params, grads);

  double reward_sum = 0.0, ent_sum = 0.0, steps = 0.0;
  for (const auto& tr : batch) {
    reward_sum += tr.reward;
    for (double h : tr.entropies) ent_sum += h;
    steps += static_cast<double>(tr.entropies.size());
  }
  st.mean_reward = reward_sum / static_cast<double>(batch.size());
  st.mean_entropy = steps > 0 ? ent_sum / steps : 0.0;
  s.baseline = cfg.baseline_decay * s.baseline + (1.0 - cfg.baseline_decay) * st.mean_reward;
  return st;
}

// Next `count` query indices from the shuffled pass.
inline std::vector<std::size_t> next_queries(TrainState& s, std::size_t num_queries, std::size_t count) {
  if (num_queries == 0) fail(ErrorKind::Input, "no training queries");
  std::vector<std::size_t> out;
  while (out.size() < count) {
    if (s.cursor >= s.order.size()) {
      s.order.resize(num_queries);
      for (std::size_t i = 0; i < num_queries; ++i) s.order[i] = i;
      for (std::size_t i = num_queries; i > 1; --i) std::swap(s.order[i - 1], s.order[s.order_rng.below(i)]);
      s.cursor = 0;
    }
    out.push_back(s.order[s.cursor++]);
  }
  return out;
}

// Samples one batch and applies one update.
inline BatchStats train_epoch(TrainState& s, const WalkEnv& env, std::span<const Query> queries,
                              const AgentConfig& cfg) {
  const auto per_batch = static_cast<std::size_t>(cfg.batch / cfg.rollouts_per_query);
  std::vector<Trajectory> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch));
  for (auto qi : next_queries(s, queries.size(), per_batch))
    for (std::int32_t k = 0; k < cfg.rollouts_per_query; ++k)
      batch.push_back(sample_trajectory(s.params, env, queries[qi], s.rollout_rng));
  auto st = reinforce_update(s, env, batch, cfg);
  ++s.epoch;
  return st;
}

}  // namespace kgwalk
