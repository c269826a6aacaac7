#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "kgwalk/env.hpp"
#include "kgwalk/error.hpp"
#include "kgwalk/policy.hpp"

namespace kgwalk {

struct RankedEntity {
  EntityId entity = 0;
  double score = 0.0;  // best path log-probability

  friend bool operator==(const RankedEntity&, const RankedEntity&) = default;
};

// Sorts by score descending, entity id ascending on ties.
inline void sort_ranking(std::vector<RankedEntity>& r) {
  std::sort(r.begin(), r.end(), [](const RankedEntity& a, const RankedEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
}

// Keeps each entity's best score, then sorts.
inline std::vector<RankedEntity> best_per_entity(const std::vector<RankedEntity>& endpoints) {
  std::unordered_map<EntityId, double> best;
  for (const auto& e : endpoints) {
    auto [it, inserted] = best.emplace(e.entity, e.score);
    if (!inserted && e.score > it->second) it->second = e.score;
  }
  std::vector<RankedEntity> out;
  out.reserve(best.size());
  for (auto [e, s] : best) out.push_back({e, s});
  sort_ranking(out);
  return out;
}

// Beam search over T steps on cumulative log-probability. Candidates that
// tie on score are ordered by (parent beam rank, action index).
inline std::vector<RankedEntity> beam_decode(const PolicyParams& p, const WalkEnv& env, const Query& query,
                                             std::int32_t width) {
  if (width < 1) fail(ErrorKind::Validation, "beam width must be at least 1");
  struct Hyp {
    double score;
    EpisodeState state;
    WalkerState walker;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    std::size_t action;
  };

  std::vector<Hyp> beam;
  beam.push_back({0.0, env.reset(query), initial_walker(p, env.graph())});
  std::vector<StepCache> caches;
  std::vector<Candidate> cands;
  for (std::int32_t t = 0; t < env.horizon(); ++t) {
    caches.assign(beam.size(), StepCache{});
    cands.clear();
    for (std::size_t b = 0; b < beam.size(); ++b) {
      policy_step(p, beam[b].walker, beam[b].state.current, query.relation, env.actions(beam[b].state), caches[b]);
      for (std::size_t k = 0; k < caches[b].log_probs.size(); ++k)
        cands.push_back({beam[b].score + caches[b].log_probs[k], b, k});
    }
    const auto keep = std::min(cands.size(), static_cast<std::size_t>(width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.action < b.action;
                      });
    std::vector<Hyp> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      next.push_back({c.score, env.step(beam[c.parent].state, c.action), advance(caches[c.parent], c.action)});
    }
    beam = std::move(next);
  }

  std::vector<RankedEntity> endpoints;
  endpoints.reserve(beam.size());
  for (const auto& h : beam) endpoints.push_back({h.state.current, h.score});
  return best_per_entity(endpoints);
}

}  // namespace kgwalk
