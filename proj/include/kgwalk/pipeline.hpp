#pragma once

// Glue shared by the command-line tool and the end-to-end tests: loading
// triple files against one vocabulary, deriving queries, and wiring the
// training and evaluation loops together.

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgwalk/metrics.hpp"
#include "kgwalk/score_table.hpp"
#include "kgwalk/trainer.hpp"
#include "kgwalk/triples.hpp"

namespace kgwalk {

// Entities that appear in at least one fact of the graph.
inline std::vector<char> active_entities(const Graph& g) {
  std::vector<char> on(static_cast<std::size_t>(g.num_entities()), 0);
  for (const auto& t : g.facts()) on[t.head] = on[t.tail] = 1;
  return on;
}

// Triples whose head and tail both occur in the graph. Queries about
// entities the graph has never seen cannot be answered by walking it.
inline std::vector<Triple> restrict_to_graph(std::span<const Triple> triples, const Graph& g) {
  auto on = active_entities(g);
  std::vector<Triple> out;
  for (const auto& t : triples)
    if (g.valid_entity(t.head) && g.valid_entity(t.tail) && on[t.head] && on[t.tail]) out.push_back(t);
  return out;
}

inline std::vector<Query> training_queries(const Graph& g) {
  std::vector<Query> q;
  q.reserve(g.num_facts());
  for (const auto& t : g.facts()) q.push_back(to_query(t));
  return q;
}

// Triples read against a fixed vocabulary; unknown names are an error.
inline std::vector<Triple> read_triples_strict(const std::string& path, const Vocab& entities,
                                               const Vocab& relations) {
  Vocab e = entities, r = relations;
  return parse_triples_into(read_text_file(path), e, r, VocabPolicy::Strict).triples;
}

// Train / dev / test files sharing one vocabulary, interned in file order.
struct Dataset {
  Vocab entities, relations;
  std::vector<Triple> train, valid, test;
};

inline Dataset load_dataset(const std::string& train, const std::string& valid, const std::string& test) {
  Dataset d;
  d.train = parse_triples_into(read_text_file(train), d.entities, d.relations, VocabPolicy::Intern).triples;
  if (!valid.empty())
    d.valid = parse_triples_into(read_text_file(valid), d.entities, d.relations, VocabPolicy::Intern).triples;
  if (!test.empty())
    d.test = parse_triples_into(read_text_file(test), d.entities, d.relations, VocabPolicy::Intern).triples;
  return d;
}

// Trains an agent on `walk` and returns the kept parameters. With dev
// triples, the policy is scored every cfg.eval_every epochs by filtered MRR
// and the best one is kept.
struct AgentRun {
  TrainState state;
  AgentTrainResult result;
};

inline AgentRun run_agent(const Graph& walk, const ScoreProvider* shaper, const AgentConfig& cfg,
                          std::span<const Triple> dev, const KnownAnswers& known,
                          const std::function<void(const std::string&)>& log = {},
                          std::optional<TrainState> resume = std::nullopt) {
  validate(cfg);
  EnvConfig ec{.horizon = cfg.horizon,
               .reward_mode = shaper ? RewardMode::Shaped : RewardMode::Binary,
               .shaper = shaper,
               .hide_query_edge = cfg.hide_query_edge};
  WalkEnv env(walk, ec);
  EnvConfig eval_ec = ec;
  eval_ec.hide_query_edge = false;
  WalkEnv eval_env(walk, eval_ec);
  auto queries = training_queries(walk);
  if (queries.empty()) fail(ErrorKind::Validation, "the training graph has no facts");
  AgentRun run{resume ? std::move(*resume) : init_train_state(walk, cfg), {}};
  std::function<double(const PolicyParams&)> dev_score;
  if (!dev.empty())
    dev_score = [&](const PolicyParams& p) {
      return evaluate(p, eval_env, dev, cfg.beam_width, RankMode::Filtered, known).mrr;
    };
  run.result = train_agent(run.state, env, queries, cfg, dev_score, log);
  return run;
}

inline RankingReport evaluate_agent(const PolicyParams& p, const Graph& walk, std::int32_t horizon,
                                    std::span<const Triple> test, std::int32_t beam, RankMode mode,
                                    const KnownAnswers& known) {
  WalkEnv env(walk, EnvConfig{.horizon = horizon, .hide_query_edge = false});
  return evaluate(p, env, test, beam, mode, known);
}

}  // namespace kgwalk
