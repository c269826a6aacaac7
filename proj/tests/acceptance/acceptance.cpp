// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass a criterion name to run only that one.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "kgwalk/kgwalk.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace kgwalk;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr int kGradInstances = 20;
constexpr double kGradBudgetSec = 10;
constexpr int kBeamSeeds = 100;
constexpr std::size_t kMaxPaths = 200;
constexpr double kBeamBudgetSec = 30;
constexpr double kMetricTol = 1e-9;
constexpr int kFuzzLists = 1000;
constexpr int kChainEpochs = 200;
constexpr double kChainBudgetSec = 60;
constexpr double kShapingGap = 0.05;
constexpr double kShapingBudgetSec = 30 * 60;
constexpr double kShaperHits10 = 0.80;
constexpr double kShaperBudgetSec = 10 * 60;

const std::string kUmls = std::string(KGWALK_DATA_DIR) + "/umls/";

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_oracles() {
  Clock clock;
  double worst_shaper = 0, worst_policy = 0;
  Rng rng(2024);
  for (int i = 0; i < kGradInstances; ++i) {
    for (auto kind : {ShaperKind::DistMult, ShaperKind::ComplEx}) {
      const int ne = 2 + static_cast<int>(rng.below(5)), nr = 1 + static_cast<int>(rng.below(3));
      Graph g(ne, nr, oracle::random_facts(rng, ne, nr, 0.3));
      ShaperModel m = init_shaper(kind, ne, nr, TrainConfig{.dim = 1 + static_cast<int>(rng.below(8)), .seed = rng.next_u64()});
      m.entity.fill_uniform(rng, -1, 1);
      m.relation.fill_uniform(rng, -1, 1);
      auto pairs = labelled_pairs(g);
      std::vector<std::size_t> all(pairs.size());
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
      ShaperGrad grad;
      shaper_loss(m, pairs, all, 0.1, 1e-3, &grad);
      auto c = oracle::compare_with_central_differences(
          {&m.entity, &m.relation}, {&grad.entity, &grad.relation},
          [&] { return shaper_loss(m, pairs, all, 0.1, 1e-3, nullptr); }, kGradStep);
      worst_shaper = std::max(worst_shaper, c.max_rel_error);
    }
  }
  for (int i = 0; i < kGradInstances; ++i) {
    const int ne = 2 + static_cast<int>(rng.below(5)), nr = 1 + static_cast<int>(rng.below(3));
    Graph g(ne, nr, oracle::random_facts(rng, ne, nr, 0.3));
    WalkEnv env(g, {.horizon = 2});
    auto p = init_policy(g, {.entity_dim = 1 + static_cast<int>(rng.below(8)), .hidden_dim = 1 + static_cast<int>(rng.below(8))},
                         rng.child("init"));
    oracle::randomize(p, rng, 0.8);
    std::vector<Trajectory> batch;
    for (int b = 0; b < 4; ++b) {
      auto tr = sample_trajectory(p, env, {static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(nr)), std::nullopt}, rng);
      tr.reward = rng.uniform();
      batch.push_back(tr);
    }
    const double baseline = rng.uniform(), beta = rng.uniform(0, 0.1);
    auto grad = p.zeros_like();
    reinforce_gradient(p, env, batch, baseline, beta, &grad);
    auto pt = p.tensors();
    auto gt = std::as_const(grad).tensors();
    auto c = oracle::compare_with_central_differences(
        {pt.begin(), pt.end()}, {gt.begin(), gt.end()},
        [&] { return reinforce_gradient(p, env, batch, baseline, beta, nullptr); }, kGradStep);
    worst_policy = std::max(worst_policy, c.max_rel_error);
  }
  const double t = clock.seconds();
  return {worst_shaper < kGradRelTol && worst_policy < kGradRelTol && t < kGradBudgetSec,
          fmt("shaper max rel err %.2e (%d DistMult + %d ComplEx), reinforce max rel err %.2e (%d), %.1fs",
              worst_shaper, kGradInstances, kGradInstances, worst_policy, kGradInstances, t)};
}

// ---------------------------------------------------------------- beam

Outcome beam_equivalence() {
  Clock clock;
  int mismatches = 0;
  std::size_t most_paths = 0;
  for (int seed = 0; seed < kBeamSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const std::int32_t T = 2 + static_cast<std::int32_t>(rng.below(2));
    double density = 0.3;
    for (;;) {
      const int ne = 3 + static_cast<int>(rng.below(4)), nr = 1 + static_cast<int>(rng.below(2));
      Graph g(ne, nr, oracle::random_facts(rng, ne, nr, density));
      WalkEnv env(g, {.horizon = T});
      Query q{static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(nr)), std::nullopt};
      const auto n = oracle::count_paths(env, q);
      if (n > kMaxPaths) {
        density *= 0.8;
        continue;
      }
      most_paths = std::max(most_paths, n);
      auto p = init_policy(g, {.entity_dim = 4, .hidden_dim = 4}, rng.child("policy"));
      oracle::randomize(p, rng, 1.0);
      auto beam = beam_decode(p, env, q, static_cast<std::int32_t>(n));
      auto exact = oracle::rank_by_enumeration(oracle::enumerate_paths(p, env, q));
      bool same = beam.size() == exact.size();
      for (std::size_t i = 0; same && i < beam.size(); ++i)
        same = beam[i].entity == exact[i].first && beam[i].score == exact[i].second;
      mismatches += !same;
      break;
    }
  }
  const double t = clock.seconds();
  return {mismatches == 0 && t < kBeamBudgetSec,
          fmt("%d/%d seeds identical (largest path count %zu), %.1fs", kBeamSeeds - mismatches, kBeamSeeds, most_paths, t)};
}

// ---------------------------------------------------------------- metrics

Outcome metric_oracle() {
  bool ok = true;
  auto near = [&](double a, double b) { ok = ok && std::abs(a - b) <= kMetricTol; };
  {
    std::vector<std::int64_t> r{1, 3, 10};
    auto a = aggregate(r);
    near(a.hits1, 1.0 / 3);
    near(a.hits3, 2.0 / 3);
    near(a.hits10, 1.0);
    near(a.mrr, 0.4777777777777778);
  }
  {
    std::vector<std::int64_t> r{2, 2};
    auto a = aggregate(r);
    near(a.hits1, 0.0);
    near(a.hits3, 1.0);
    near(a.mrr, 0.5);
  }
  {
    std::vector<RankedEntity> ranked{{2, -0.1}, {1, -0.2}, {0, -0.3}};
    std::vector<EntityId> known{1, 2};
    ok = ok && rank_of_answer(ranked, 1, RankMode::Raw, known, 3) == 2;
    ok = ok && rank_of_answer(ranked, 1, RankMode::Filtered, known, 3) == 1;
    ok = ok && rank_of_answer(ranked, 9, RankMode::Raw, {}, 135) == 136;
  }
  const bool hand = ok;
  int violations = 0;
  Rng rng(77);
  for (int i = 0; i < kFuzzLists; ++i) {
    std::vector<std::int64_t> r(1 + rng.below(100));
    for (auto& k : r) k = 1 + static_cast<std::int64_t>(rng.below(300));
    auto a = aggregate(r);
    double mrr = 0;
    for (auto k : r) mrr += 1.0 / static_cast<double>(k);
    mrr /= static_cast<double>(r.size());
    const bool good = a.hits1 <= a.hits3 && a.hits3 <= a.hits5 && a.hits5 <= a.hits10 && a.hits10 <= 1.0 &&
                      a.hits1 >= 0.0 && a.mrr > 0.0 && a.mrr <= 1.0 && a.mrr >= a.hits1 &&
                      std::abs(a.mrr - mrr) <= kMetricTol;
    violations += !good;
  }
  return {hand && violations == 0,
          fmt("hand-computed values %s, %d/%d fuzzed lists satisfy the invariants", hand ? "match" : "DIFFER",
              kFuzzLists - violations, kFuzzLists)};
}

// ---------------------------------------------------------------- chain

Outcome learning_sanity() {
  Clock clock;
  auto kg = oracle::chain_kg();
  Graph g = build_graph(kg.entities, kg.relations, kg.triples);
  KnownAnswers known;
  known.add(g.facts());
  std::string detail;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    // The answer is the only edge out of the source, so it must stay visible.
    AgentConfig cfg{.epochs = kChainEpochs, .hide_query_edge = false, .seed = seed};
    auto run = run_agent(g, nullptr, cfg, {}, known);
    auto report = evaluate_agent(run.state.params, g, cfg.horizon, g.facts(), 1, RankMode::Filtered, known);
    solved += report.hits1 == 1.0;
    detail += fmt("seed %llu Hits@1=%.3f; ", static_cast<unsigned long long>(seed), report.hits1);
  }
  const double t = clock.seconds();
  return {solved == 3 && t < kChainBudgetSec, detail + fmt("%.1fs", t)};
}

// ---------------------------------------------------------------- UMLS

struct Umls {
  Dataset data = load_dataset(kUmls + "train.tsv", kUmls + "valid.tsv", kUmls + "test.tsv");
  Graph rich{data.entities.size(), data.relations.size(), data.train};
  KnownAnswers known;
  Umls() {
    if (data.entities.size() != 135 || data.relations.size() != 46 || data.train.size() != 5216)
      fail(ErrorKind::Validation, "unexpected UMLS shape");
    known.add(data.train);
    known.add(data.valid);
    known.add(data.test);
  }
};


// Agent hyperparameters, identical for both reward modes, chosen on dev.
AgentConfig umls_agent(std::uint64_t seed) {
  return AgentConfig{.learning_rate = 3e-3,
                     .entropy_weight = 0.05,
                     .epochs = 4000,
                     .eval_every = 200,
                     .seed = seed};
}

Outcome shaper_quality() {
  Clock clock;
  Umls u;
  auto m = train_shaper(u.rich, ShaperKind::DistMult, TrainConfig{});
  auto report = evaluate_shaper(m, u.data.valid, RankMode::Filtered, u.known);
  const double t = clock.seconds();
  return {report.hits10 >= kShaperHits10 && t < kShaperBudgetSec,
          fmt("filtered dev Hits@10=%.3f MRR=%.3f over %lld triples, %.1fs", report.hits10, report.mrr,
              static_cast<long long>(report.count), t)};
}

Outcome shaping_direction() {
  Clock clock;
  Umls u;
  auto split = mask_split(u.rich, {.node_mask_ratio = 0.5, .edge_mask_ratio = 0.5, .seed = 42});
  const Graph& sparse = split.sparse;
  auto dev = restrict_to_graph(u.data.valid, sparse);
  auto test = restrict_to_graph(u.data.test, sparse);
  auto shaper = train_shaper(u.rich, ShaperKind::DistMult, TrainConfig{});
  EmbeddingScorer f(shaper);

  double sum[2] = {0, 0};
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (int shaped = 0; shaped < 2; ++shaped) {
      auto cfg = umls_agent(seed);
      auto run = run_agent(sparse, shaped ? &f : nullptr, cfg, dev, u.known);
      auto r = evaluate_agent(run.result.best, sparse, cfg.horizon, test, cfg.beam_width, RankMode::Filtered, u.known);
      sum[shaped] += r.hits1;
      detail += fmt("seed %llu %s Hits@1=%.3f; ", static_cast<unsigned long long>(seed), shaped ? "shaped" : "binary",
                    r.hits1);
    }
  }
  const double binary = sum[0] / 3, shaped = sum[1] / 3;
  const double t = clock.seconds();
  return {shaped - binary >= kShapingGap && t < kShapingBudgetSec,
          fmt("mean test Hits@1 binary=%.3f shaped=%.3f gap=%+.3f (need >= %.2f) on %zu test queries; ", binary,
              shaped, shaped - binary, kShapingGap, test.size()) +
              detail + fmt("%.1fs", t)};
}

// ---------------------------------------------------------------- reproducibility

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / ("kgwalk_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string cli = KGWALK_CLI_PATH;
  auto d = [&](const std::string& n) { return (root / n).string(); };
  struct Stage {
    std::string dir, args;
  };
  const std::vector<Stage> stages{
      {"split", "split --in " + kUmls + "train.tsv --vocab-from " + kUmls + "valid.tsv " + kUmls +
                    "test.tsv --out " + d("split")},
      {"shaper", "train-shaper --graph " + d("split") + "/rich.tsv --dim 16 --epochs 5 --out " + d("shaper")},
      {"scores", "export-scores --shaper " + d("shaper") + "/shaper.json --queries " + d("split") +
                     "/sparse.tsv --out " + d("scores")},
      {"agent", "train-agent --graph " + d("split") + "/sparse.tsv --shaper embed:" + d("shaper") +
                    "/shaper.json --dev " + kUmls + "valid.tsv --entity-dim 8 --hidden-dim 8 --epochs 6 --batch 16 "
                    "--eval-every 3 --beam 8 --out " + d("agent")},
      {"agent_table", "train-agent --graph " + d("split") + "/sparse.tsv --shaper table:" + d("scores") +
                          "/scores.tsv --entity-dim 8 --hidden-dim 8 --epochs 4 --batch 16 --out " + d("agent_table")},
      {"eval", "eval --agent " + d("agent") + "/agent.json --graph " + d("split") + "/sparse.tsv --test " + kUmls +
                   "test.tsv --known " + d("split") + "/rich.tsv " + kUmls + "valid.tsv --beam 8 --out " + d("eval")}};

  int identical = 0, files = 0;
  std::string bad;
  for (const auto& s : stages) {
    if (shell(cli + " " + s.args) != 0) {
      bad += s.dir + "(run failed) ";
      continue;
    }
    auto manifest = read_text_file(d(s.dir) + "/manifest.json");
    auto cmd = s.args.substr(0, s.args.find(' '));
    if (shell(cli + " " + cmd + " --config " + d(s.dir) + "/manifest.json --out " + d(s.dir + "_rerun")) != 0) {
      bad += s.dir + "(rerun failed) ";
      continue;
    }
    for (const auto& entry : fs::directory_iterator(d(s.dir))) {
      const auto name = entry.path().filename().string();
      ++files;
      if (read_text_file(entry.path().string()) == read_text_file(d(s.dir + "_rerun") + "/" + name))
        ++identical;
      else
        bad += s.dir + "/" + name + " ";
    }
  }
  fs::remove_all(root);
  return {bad.empty() && files > 0,
          fmt("%d/%d output files byte-identical across %zu stages", identical, files, stages.size()) +
              (bad.empty() ? "" : "; differing: " + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-oracles", gradient_oracles},
      {"beam-brute-force-equivalence", beam_equivalence},
      {"metric-oracle", metric_oracle},
      {"learning-sanity-chain", learning_sanity},
      {"directional-shaping-gap", shaping_direction},
      {"shaper-quality-gate", shaper_quality},
      {"reproducibility-from-manifest", reproducibility}};
  const std::string only = argc > 1 ? argv[1] : "";
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && name != only) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
