#pragma once

// Link-prediction ranking metrics: Hits@{1,3,5,10} and MRR, raw or filtered.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kgwalk/beam.hpp"
#include "kgwalk/env.hpp"
#include "kgwalk/error.hpp"
#include "kgwalk/policy.hpp"
#include "kgwalk/shaper.hpp"

namespace kgwalk {

enum class RankMode { Raw, Filtered };

inline const char* to_string(RankMode m) { return m == RankMode::Raw ? "raw" : "filtered"; }

inline RankMode parse_rank_mode(const std::string& s) {
  if (s == "raw") return RankMode::Raw;
  if (s == "filtered") return RankMode::Filtered;
  fail(ErrorKind::Validation, "unknown ranking mode '" + s + "' (expected raw or filtered)");
}

// Known-correct tails per (head, relation), used by filtered ranking.
class KnownAnswers {
 public:
  void add(std::span<const Triple> triples) {
    for (const auto& t : triples) tails_[{t.head, t.relation}].push_back(t.tail);
    for (auto& [k, v] : tails_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::span<const EntityId> of(EntityId head, RelationId relation) const {
    auto it = tails_.find({head, relation});
    if (it == tails_.end()) return {};
    return it->second;
  }

 private:
  std::map<std::pair<EntityId, RelationId>, std::vector<EntityId>> tails_;
};

// 1-based rank of `answer`. Filtered mode skips other known answers ranked
// above it. Absent answers get num_entities + 1.
inline std::int64_t rank_of_answer(std::span<const RankedEntity> ranked, EntityId answer, RankMode mode,
                                   std::span<const EntityId> known_answers, std::int32_t num_entities) {
  std::vector<EntityId> seen;
  seen.reserve(ranked.size());
  for (const auto& r : ranked) seen.push_back(r.entity);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    fail(ErrorKind::Input, "ranked list contains duplicate entities");

  std::int64_t rank = 1;
  for (const auto& r : ranked) {
    if (r.entity == answer) return rank;
    if (mode == RankMode::Filtered && std::binary_search(known_answers.begin(), known_answers.end(), r.entity))
      continue;
    ++rank;
  }
  return static_cast<std::int64_t>(num_entities) + 1;
}

struct QueryRank {
  Triple triple;
  std::int64_t rank = 0;
};

struct RankingReport {
  RankMode mode = RankMode::Filtered;
  std::vector<QueryRank> queries;
  double hits1 = 0, hits3 = 0, hits5 = 0, hits10 = 0, mrr = 0;
  std::int64_t count = 0;

  double hits(int k) const {
    switch (k) {
      case 1: return hits1;
      case 3: return hits3;
      case 5: return hits5;
      case 10: return hits10;
      default: fail(ErrorKind::Input, "hits@k is reported for k in {1,3,5,10}");
    }
  }
};

inline RankingReport aggregate(std::span<const std::int64_t> ranks, RankMode mode = RankMode::Filtered) {
  if (ranks.empty()) fail(ErrorKind::Evaluation, "cannot aggregate an empty rank list");
  RankingReport r;
  r.mode = mode;
  r.count = static_cast<std::int64_t>(ranks.size());
  std::int64_t h1 = 0, h3 = 0, h5 = 0, h10 = 0;
  double rr = 0.0;
  for (auto k : ranks) {
    if (k < 1) fail(ErrorKind::Input, "ranks are 1-based");
    h1 += k <= 1;
    h3 += k <= 3;
    h5 += k <= 5;
    h10 += k <= 10;
    rr += 1.0 / static_cast<double>(k);
  }
  const double n = static_cast<double>(ranks.size());
  r.hits1 = static_cast<double>(h1) / n;
  r.hits3 = static_cast<double>(h3) / n;
  r.hits5 = static_cast<double>(h5) / n;
  r.hits10 = static_cast<double>(h10) / n;
  r.mrr = rr / n;
  return r;
}

// Ranks every triple's tail with `ranker(head, relation)` and aggregates.
inline RankingReport evaluate_rankings(
    std::span<const Triple> test, RankMode mode, const KnownAnswers& known, std::int32_t num_entities,
    const std::function<std::vector<RankedEntity>(EntityId, RelationId)>& ranker) {
  std::vector<QueryRank> per_query;
  std::vector<std::int64_t> ranks;
  per_query.reserve(test.size());
  for (const auto& t : test) {
    auto ranked = ranker(t.head, t.relation);
    auto rank = rank_of_answer(ranked, t.tail, mode, known.of(t.head, t.relation), num_entities);
    per_query.push_back({t, rank});
    ranks.push_back(rank);
  }
  auto report = aggregate(ranks, mode);
  report.queries = std::move(per_query);
  return report;
}

// Beam-decoded policy rankings; the env should not hide query edges.
inline RankingReport evaluate(const PolicyParams& p, const WalkEnv& env, std::span<const Triple> test,
                              std::int32_t beam_width, RankMode mode, const KnownAnswers& known) {
  return evaluate_rankings(test, mode, known, env.graph().num_entities(), [&](EntityId h, RelationId r) {
    return beam_decode(p, env, Query{h, r, std::nullopt}, beam_width);
  });
}

// Embedding-model rankings over all entities.
inline RankingReport evaluate_shaper(const ShaperModel& m, std::span<const Triple> test, RankMode mode,
                                     const KnownAnswers& known) {
  return evaluate_rankings(test, mode, known, m.num_entities(), [&](EntityId h, RelationId r) {
    auto scores = score_tails(m, h, r);
    std::vector<RankedEntity> ranked;
    ranked.reserve(scores.size());
    for (EntityId e = 0; e < m.num_entities(); ++e) ranked.push_back({e, scores[e]});
    sort_ranking(ranked);
    return ranked;
  });
}

inline std::string format_report_kv(const RankingReport& r) {
  std::ostringstream ss;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    ss << key << '=' << buf << '\n';
  };
  put("hits1", r.hits1);
  put("hits3", r.hits3);
  put("hits5", r.hits5);
  put("hits10", r.hits10);
  put("mrr", r.mrr);
  ss << "n=" << r.count << '\n' << "mode=" << to_string(r.mode) << '\n';
  return ss.str();
}

inline std::string format_report_table(const RankingReport& r, const std::string& label = "model") {
  char buf[256];
  std::ostringstream ss;
  std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s %8s %8s %6s\n", "configuration", "Hits@1", "Hits@3", "Hits@5",
                "Hits@10", "MRR", "n");
  ss << buf;
  std::snprintf(buf, sizeof buf, "%-28s %8.3f %8.3f %8.3f %8.3f %8.3f %6lld\n", label.c_str(), r.hits1, r.hits3,
                r.hits5, r.hits10, r.mrr, static_cast<long long>(r.count));
  ss << buf;
  return ss.str();
}

}  // namespace kgwalk
