#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "kgwalk/reinforce.hpp"

namespace kgwalk {

struct AgentTrainResult {
  PolicyParams best;
  std::int64_t best_epoch = 0;
  std::optional<double> best_dev;
};

inline std::string format_epoch_log(std::int64_t epoch, const BatchStats& st, double baseline) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "epoch=%lld reward=%.6f loss=%.6f entropy=%.6f baseline=%.6f",
                static_cast<long long>(epoch), st.mean_reward, st.loss, st.mean_entropy, baseline);
  return buf;
}

// Runs the remaining epochs of `state`. `dev_score`, when set, is called
// every cfg.eval_every epochs and after the last one; the parameters with
// the highest score are kept (earliest wins ties).
inline AgentTrainResult train_agent(TrainState& state, const WalkEnv& env, std::span<const Query> queries,
                                    const AgentConfig& cfg,
                                    const std::function<double(const PolicyParams&)>& dev_score = {},
                                    const std::function<void(const std::string&)>& log = {}) {
  AgentTrainResult out;
  auto consider = [&](std::int64_t epoch) {
    if (!dev_score) return;
    const double s = dev_score(state.params);
    if (log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epoch=%lld dev_mrr=%.6f", static_cast<long long>(epoch), s);
      log(buf);
    }
    if (!out.best_dev || s > *out.best_dev) {
      out.best_dev = s;
      out.best = state.params;
      out.best_epoch = epoch;
    }
  };
  while (state.epoch < cfg.epochs) {
    auto st = train_epoch(state, env, queries, cfg);
    if (log) log(format_epoch_log(state.epoch, st, state.baseline));
    if (cfg.eval_every > 0 && state.epoch % cfg.eval_every == 0 && state.epoch < cfg.epochs) consider(state.epoch);
  }
  consider(state.epoch);
  if (!dev_score) {
    out.best = state.params;
    out.best_epoch = state.epoch;
  }
  return out;
}

}  // namespace kgwalk
