#pragma once

// Finite-horizon walk MDP. Transitions are deterministic; the only reward
// is terminal, binary on the reward graph's facts or shaped.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/graph.hpp"
#include "kgwalk/score_table.hpp"

namespace kgwalk {

struct Query {
  EntityId source = 0;
  RelationId relation = 0;
  std::optional<EntityId> answer;

  friend bool operator==(const Query&, const Query&) = default;
};

inline Query to_query(const Triple& t) { return {t.head, t.relation, t.tail}; }

enum class RewardMode { Binary, Shaped };

inline const char* to_string(RewardMode m) { return m == RewardMode::Binary ? "binary" : "shaped"; }

struct EnvConfig {
  std::int32_t horizon = 3;
  RewardMode reward_mode = RewardMode::Binary;
  const ScoreProvider* shaper = nullptr;
  // Hide (source, relation, answer) and its inverse from the action sets of
  // an episode whose query carries an answer.
  bool hide_query_edge = true;
};

struct EpisodeState {
  std::int32_t t = 0;
  EntityId current = 0;
  Query query;
  std::vector<Edge> history;

  friend bool operator==(const EpisodeState&, const EpisodeState&) = default;
};

class WalkEnv {
 public:
  // The environment keeps references; both graphs must outlive it.
  WalkEnv(const Graph& walk_graph, const Graph& reward_graph, EnvConfig config)
      : walk_(&walk_graph), reward_(&reward_graph), config_(config) {
    if (config_.horizon <= 0) fail(ErrorKind::Validation, "horizon must be positive");
    if (config_.reward_mode == RewardMode::Shaped && config_.shaper == nullptr)
      fail(ErrorKind::Validation, "shaped reward mode requires a shaper");
    if (walk_graph.num_entities() != reward_graph.num_entities() ||
        walk_graph.num_relations() != reward_graph.num_relations())
      fail(ErrorKind::Validation, "walk and reward graphs use different vocabularies");
    if (!walk_graph.options().self_loops) fail(ErrorKind::Validation, "the walk graph needs self-loops");
  }

  WalkEnv(const Graph& graph, EnvConfig config) : WalkEnv(graph, graph, config) {}

  const Graph& graph() const noexcept { return *walk_; }
  const Graph& reward_graph() const noexcept { return *reward_; }
  const EnvConfig& config() const noexcept { return config_; }
  std::int32_t horizon() const noexcept { return config_.horizon; }

  EpisodeState reset(const Query& q) const {
    if (!walk_->valid_entity(q.source)) fail(ErrorKind::Query, "query source id out of range");
    if (!walk_->is_original(q.relation)) fail(ErrorKind::Query, "query relation id out of range");
    if (q.answer && !walk_->valid_entity(*q.answer)) fail(ErrorKind::Query, "query answer id out of range");
    return EpisodeState{0, q.source, q, {}};
  }

  // Legal actions at the state's current entity, in adjacency order.
  std::vector<Edge> actions(const EpisodeState& s) const {
    auto all = walk_->actions_of(s.current);
    std::vector<Edge> out(all.begin(), all.end());
    if (config_.hide_query_edge && s.query.answer) {
      const auto& q = s.query;
      if (s.current == q.source)
        std::erase(out, Edge{q.relation, *q.answer});
      if (walk_->options().inverses && s.current == *q.answer)
        std::erase(out, Edge{walk_->inverse_of(q.relation), q.source});
    }
    return out;
  }

  EpisodeState step(const EpisodeState& s, std::size_t action_index) const {
    if (s.t >= config_.horizon) fail(ErrorKind::Horizon, "step past the horizon");
    auto acts = actions(s);
    if (action_index >= acts.size())
      fail(ErrorKind::Action, "action index " + std::to_string(action_index) + " out of range (" +
                                  std::to_string(acts.size()) + " actions)");
    EpisodeState next = s;
    next.t += 1;
    next.current = acts[action_index].target;
    next.history.push_back(acts[action_index]);
    return next;
  }

  double terminal_reward(const EpisodeState& s) const {
    if (s.t != config_.horizon) fail(ErrorKind::Horizon, "terminal reward requested before the horizon");
    return reward_for(s.query, s.current);
  }

  double reward_for(const Query& q, EntityId end) const {
    if (config_.reward_mode == RewardMode::Binary)
      return reward_->contains({q.source, q.relation, end}) ? 1.0 : 0.0;
    return shaped_reward(*config_.shaper, *reward_, q.source, q.relation, end);
  }

  // Index of the self-loop in an action list.
  static std::size_t self_loop_index(const std::vector<Edge>& actions, RelationId self_loop) {
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i].relation == self_loop) return i;
    fail(ErrorKind::Input, "action list has no self-loop");
  }

 private:
  const Graph* walk_;
  const Graph* reward_;
  EnvConfig config_;
};

}  // namespace kgwalk
