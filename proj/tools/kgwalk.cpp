// kgwalk: split a knowledge graph, train reward shapers and walk agents,
// and evaluate them.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgwalk/kgwalk.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kgwalk;

namespace {

// Reads JSON config files. A run manifest ({"command": ..., "config": {...}})
// applies its config to that subcommand; otherwise nested objects name
// subcommands, e.g. {"train-agent": {"epochs": 2000}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    if (j.is_object() && j.contains("command") && j.contains("config") && j["config"].is_object())
      collect(j["config"], {j["command"].get<std::string>()}, items);
    else if (j.is_object())
      collect(j, {}, items);
    else
      throw CLI::ConversionError("config file must hold a JSON object");
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, v] : obj.items()) {
      if (v.is_null() || (v.is_array() && v.empty())) continue;
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array())
        for (const auto& x : v) item.inputs.push_back(scalar(x));
      else
        item.inputs.push_back(scalar(v));
      out.push_back(std::move(item));
    }
  }
};

// Options of one subcommand, remembered so the resolved values can be
// written to the run manifest.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& about)
      : app_(parent.add_subcommand(name, about)), name_(name) {
    app_->add_option("--out", out_, "Output directory (overridden by KGWALK_OUT_DIR)")->configurable(false);
  }

  template <class T>
  CLI::Option* option(const std::string& flag, T& var, const std::string& help) {
    record(flag, [&var] { return json(var); });
    return app_->add_option(flag, var, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& flags, bool& var, const std::string& help) {
    record(flags.substr(0, flags.find(',')), [&var] { return json(var); });
    return app_->add_flag(flags, var, help);
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  json resolved() const {
    json j = json::object();
    for (const auto& [k, get] : fields_) j[k] = get();
    return j;
  }

  fs::path out_dir() const {
    const char* env = std::getenv("KGWALK_OUT_DIR");
    std::string dir = env && *env ? env : out_;
    if (dir.empty()) fail(ErrorKind::Validation, "--out is required (or set KGWALK_OUT_DIR)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir + ": " + ec.message());
    return dir;
  }

 private:
  void record(const std::string& flag, std::function<json()> get) {
    auto name = flag.substr(flag.find_first_not_of('-'));
    fields_.emplace_back(name, std::move(get));
  }

  CLI::App* app_;
  std::string name_;
  std::string out_;
  std::vector<std::pair<std::string, std::function<json()>>> fields_;
};

// Collects input checksums and written files for the manifest.
class Run {
 public:
  Run(const Command& cmd) : cmd_(cmd), dir_(cmd.out_dir()) {}

  std::string input(const std::string& path) {
    auto text = read_text_file(path);
    inputs_[path] = sha256_hex(text);
    return text;
  }

  void write(const std::string& name, const std::string& text) {
    write_text_file((dir_ / name).string(), text);
    outputs_[name] = sha256_hex(text);
  }

  void finish() {
    json m{{"format_version", 1},
           {"command", cmd_.name()},
           {"config", cmd_.resolved()},
           {"inputs", inputs_},
           {"outputs", outputs_}};
    write_text_file((dir_ / "manifest.json").string(), m.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  const Command& cmd_;
  fs::path dir_;
  std::map<std::string, std::string> inputs_, outputs_;
};

void log_line(const std::string& line) { std::cerr << line << '\n'; }

// Vocabulary files default to entities.txt / relations.txt next to `anchor`.
struct VocabPaths {
  std::string entities, relations;
};

std::pair<Vocab, Vocab> load_vocab(Run& run, VocabPaths p, const std::string& anchor) {
  auto dir = fs::path(anchor).parent_path();
  if (p.entities.empty()) p.entities = (dir / "entities.txt").string();
  if (p.relations.empty()) p.relations = (dir / "relations.txt").string();
  return {parse_vocab(run.input(p.entities)), parse_vocab(run.input(p.relations))};
}

std::vector<Triple> load_triples(Run& run, const std::string& path, const Vocab& ents, const Vocab& rels) {
  Vocab e = ents, r = rels;
  return parse_triples_into(run.input(path), e, r, VocabPolicy::Strict).triples;
}

void require_vocab(const std::string& expected, const Vocab& ents, const Vocab& rels, const std::string& what) {
  if (expected != vocab_checksum(ents, rels))
    fail(ErrorKind::Incompatible, what + " was built for a different vocabulary (checksum mismatch)");
}

std::string report_file(const RankingReport& r, const std::string& extra = {}) { return format_report_kv(r) + extra; }

std::string ranks_file(const RankingReport& r, const Vocab& ents, const Vocab& rels) {
  std::string out;
  for (const auto& q : r.queries)
    out += ents.name(q.triple.head) + '\t' + rels.name(q.triple.relation) + '\t' + ents.name(q.triple.tail) + '\t' +
           std::to_string(q.rank) + '\n';
  return out;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string in;
  std::vector<std::string> vocab_from;
  double node_ratio = 0.5, edge_ratio = 0.5;
  std::uint64_t seed = 42;
};

void setup_split(Command& c, SplitArgs& a) {
  c.option("--in", a.in, "Triples to split (TSV: head, relation, tail)")->required();
  c.option("--vocab-from", a.vocab_from, "Further triple files whose names join the vocabulary");
  c.option("--node-ratio", a.node_ratio, "Fraction of entities to mask");
  c.option("--edge-ratio", a.edge_ratio, "Fraction of surviving facts to mask");
  c.option("--seed", a.seed, "Split seed");
}

void cmd_split(const Command& c, const SplitArgs& a) {
  SplitSpec spec{.node_mask_ratio = a.node_ratio, .edge_mask_ratio = a.edge_ratio, .seed = a.seed};
  validate(spec);
  Run run(c);
  Vocab ents, rels;
  auto triples = parse_triples_into(run.input(a.in), ents, rels, VocabPolicy::Intern).triples;
  std::vector<Triple> queries;
  for (const auto& path : a.vocab_from) {
    auto more = parse_triples_into(run.input(path), ents, rels, VocabPolicy::Intern).triples;
    queries.insert(queries.end(), more.begin(), more.end());
  }
  Graph rich(ents.size(), rels.size(), triples);
  auto result = mask_split(rich, spec);
  auto verification = verify_split(result, queries);

  std::string masked;
  for (auto e : result.masked_entities) masked += ents.name(e) + '\n';
  std::ostringstream ev, rv;
  ents.write(ev);
  rels.write(rv);
  run.write("rich.tsv", format_triples(rich.facts(), ents, rels));
  run.write("sparse.tsv", format_triples(result.sparse.facts(), ents, rels));
  run.write("masked_entities.txt", masked);
  run.write("split_report.txt", format_split_report(spec, result.report, verification));
  run.write("masked_triples.tsv", format_triples(result.masked_triples, ents, rels));
  run.write("entities.txt", ev.str());
  run.write("relations.txt", rv.str());
  run.finish();
  std::cout << format_split_report(spec, result.report, verification);
}

// ---------------------------------------------------------------- train-shaper

struct ShaperArgs {
  std::string graph, dev;
  VocabPaths vocab;
  std::string model = "distmult";
  TrainConfig cfg;
};

void setup_train_shaper(Command& c, ShaperArgs& a) {
  c.option("--graph", a.graph, "Training triples (rich or sparse)")->required();
  c.option("--entities", a.vocab.entities, "Entity vocabulary (default: entities.txt next to --graph)");
  c.option("--relations", a.vocab.relations, "Relation vocabulary (default: relations.txt next to --graph)");
  c.option("--dev", a.dev, "Dev triples for a filtered ranking report");
  c.option("--model", a.model, "distmult or complex");
  c.option("--dim", a.cfg.dim, "Embedding width");
  c.option("--lr", a.cfg.learning_rate, "Adam step size");
  c.option("--epochs", a.cfg.epochs, "Passes over the (head, relation) pairs");
  c.option("--batch-size", a.cfg.batch_size, "(head, relation) pairs per update");
  c.option("--label-smoothing", a.cfg.label_smoothing, "Label smoothing epsilon");
  c.option("--l2", a.cfg.l2, "L2 weight");
  c.option("--seed", a.cfg.seed, "Initialisation and shuffling seed");
}

void cmd_train_shaper(const Command& c, const ShaperArgs& a) {
  const auto kind = parse_shaper_kind(a.model);
  validate(a.cfg);
  Run run(c);
  auto [ents, rels] = load_vocab(run, a.vocab, a.graph);
  Graph g(ents.size(), rels.size(), load_triples(run, a.graph, ents, rels));
  auto model = train_shaper(g, kind, a.cfg);
  std::string curve;
  char buf[80];
  for (std::size_t i = 0; i < model.loss_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "epoch=%zu loss=%.6f", i, model.loss_curve[i]);
    curve += std::string(buf) + '\n';
  }
  std::cerr << curve;
  run.write("shaper.json", save_shaper(model, a.cfg, vocab_checksum(ents, rels)));
  run.write("train.log", curve);
  if (!a.dev.empty()) {
    auto dev = load_triples(run, a.dev, ents, rels);
    KnownAnswers known;
    known.add(g.facts());
    known.add(dev);
    auto report = evaluate_shaper(model, dev, RankMode::Filtered, known);
    run.write("dev_report.txt", report_file(report));
    std::cout << format_report_table(report, std::string("shaper ") + to_string(kind));
  }
  run.finish();
}

// ---------------------------------------------------------------- export-scores

struct ExportArgs {
  std::string shaper, queries;
  VocabPaths vocab;
};

void setup_export(Command& c, ExportArgs& a) {
  c.option("--shaper", a.shaper, "Shaper checkpoint")->required();
  c.option("--queries", a.queries, "Triples whose (head, relation) pairs are scored")->required();
  c.option("--entities", a.vocab.entities, "Entity vocabulary (default: next to --queries)");
  c.option("--relations", a.vocab.relations, "Relation vocabulary (default: next to --queries)");
}

void cmd_export(const Command& c, const ExportArgs& a) {
  Run run(c);
  auto loaded = load_shaper(run.input(a.shaper));
  auto [ents, rels] = load_vocab(run, a.vocab, a.queries);
  require_vocab(loaded.vocab_sha, ents, rels, "shaper checkpoint");
  auto triples = load_triples(run, a.queries, ents, rels);
  auto table = materialize(loaded.model, query_pairs(triples));
  run.write("scores.tsv", format_score_table(table, ents, rels));
  run.finish();
  std::cout << "pairs=" << table.size() << "\nrows=" << table.size() * static_cast<std::size_t>(ents.size()) << '\n';
}

// ---------------------------------------------------------------- train-agent

struct AgentArgs {
  std::string graph, dev, shaper = "none", reward = "auto", resume;
  std::vector<std::string> known;
  VocabPaths vocab;
  AgentConfig cfg;
  bool restrict_queries = true;
};

void agent_options(Command& c, AgentConfig& cfg) {
  c.option("--entity-dim", cfg.policy.entity_dim, "Entity / relation embedding width");
  c.option("--hidden-dim", cfg.policy.hidden_dim, "Recurrent state width");
  c.option("--horizon", cfg.horizon, "Walk length T");
  c.option("--lr", cfg.learning_rate, "Adam step size");
  c.option("--beta", cfg.entropy_weight, "Entropy bonus weight");
  c.option("--beta-decay", cfg.entropy_decay, "Entropy weight decay factor");
  c.option("--beta-decay-every", cfg.entropy_decay_every, "Epochs between entropy weight decays");
  c.option("--lambda", cfg.baseline_decay, "Baseline moving-average decay");
  c.option("--epochs", cfg.epochs, "Updates (one batch each)");
  c.option("--batch", cfg.batch, "Rollouts per update");
  c.option("--rollouts-per-query", cfg.rollouts_per_query, "Rollouts per training query");
  c.option("--beam", cfg.beam_width, "Beam width for evaluation");
  c.option("--eval-every", cfg.eval_every, "Epochs between dev evaluations");
  c.option("--seed", cfg.seed, "Agent seed");
  c.flag("--hide-query-edge,!--no-hide-query-edge", cfg.hide_query_edge,
         "Hide the query edge during its own training episodes (default: on)");
}

void setup_train_agent(Command& c, AgentArgs& a) {
  c.option("--graph", a.graph, "Graph the agent walks and trains on (the sparse graph)")->required();
  c.option("--entities", a.vocab.entities, "Entity vocabulary (default: next to --graph)");
  c.option("--relations", a.vocab.relations, "Relation vocabulary (default: next to --graph)");
  c.option("--reward", a.reward, "binary, shaped, or auto (shaped when --shaper is set)");
  c.option("--shaper", a.shaper, "embed:PATH, table:PATH or none");
  c.option("--dev", a.dev, "Dev triples for best-checkpoint selection (filtered MRR)");
  c.option("--known", a.known, "Extra triple files treated as known answers when filtering");
  c.option("--resume", a.resume, "Agent checkpoint to continue training from");
  c.flag("--restrict-queries,!--all-queries", a.restrict_queries,
         "Only evaluate dev triples whose head and tail occur in --graph (default: on)");
  agent_options(c, a.cfg);
}

struct LoadedProvider {
  std::unique_ptr<ShaperModel> model;
  std::unique_ptr<ScoreProvider> provider;
};

LoadedProvider load_provider(Run& run, const std::string& spec, const Vocab& ents, const Vocab& rels) {
  LoadedProvider out;
  if (spec == "none") return out;
  auto colon = spec.find(':');
  if (colon == std::string::npos) fail(ErrorKind::Validation, "--shaper must be embed:PATH, table:PATH or none");
  auto kind = spec.substr(0, colon), path = spec.substr(colon + 1);
  if (kind == "embed") {
    auto loaded = load_shaper(run.input(path));
    require_vocab(loaded.vocab_sha, ents, rels, "shaper checkpoint");
    out.model = std::make_unique<ShaperModel>(std::move(loaded.model));
    out.provider = std::make_unique<EmbeddingScorer>(*out.model);
  } else if (kind == "table") {
    auto text = run.input(path);
    out.provider = std::make_unique<ScoreTable>(parse_score_table(text, ents, rels));
  } else {
    fail(ErrorKind::Validation, "--shaper must be embed:PATH, table:PATH or none");
  }
  return out;
}

void cmd_train_agent(const Command& c, const AgentArgs& a) {
  validate(a.cfg);
  if (a.reward != "auto" && a.reward != "binary" && a.reward != "shaped")
    fail(ErrorKind::Validation, "--reward must be binary, shaped or auto");
  const bool shaped = a.reward == "shaped" || (a.reward == "auto" && a.shaper != "none");
  if (shaped && a.shaper == "none") fail(ErrorKind::Validation, "--reward shaped needs --shaper");
  if (!shaped && a.shaper != "none") fail(ErrorKind::Validation, "--reward binary does not take a --shaper");

  Run run(c);
  auto [ents, rels] = load_vocab(run, a.vocab, a.graph);
  Graph g(ents.size(), rels.size(), load_triples(run, a.graph, ents, rels));
  auto provider = load_provider(run, a.shaper, ents, rels);
  if (auto* table = dynamic_cast<ScoreTable*>(provider.provider.get())) {
    std::size_t missing = 0;
    for (auto [h, r] : query_pairs(g.facts())) missing += !table->has(h, r);
    if (missing) fail(ErrorKind::Validation, "score table lacks " + std::to_string(missing) + " training query pairs");
  }

  KnownAnswers known;
  known.add(g.facts());
  std::vector<Triple> dev;
  if (!a.dev.empty()) {
    dev = load_triples(run, a.dev, ents, rels);
    known.add(dev);
    if (a.restrict_queries) dev = restrict_to_graph(dev, g);
  }
  for (const auto& path : a.known) known.add(load_triples(run, path, ents, rels));

  std::optional<TrainState> resume;
  if (!a.resume.empty()) {
    auto ck = load_agent(run.input(a.resume));
    if (ck.graph_fingerprint != g.fingerprint())
      fail(ErrorKind::Incompatible, "resume checkpoint was trained on a different graph");
    resume = std::move(ck.state);
  }

  std::string log;
  auto logger = [&](const std::string& line) {
    log += line + '\n';
    log_line(line);
  };
  auto result = run_agent(g, provider.provider.get(), a.cfg, dev, known, logger, std::move(resume));

  const std::string reward_mode = shaped ? "shaped" : "binary";
  AgentCheckpoint last{a.cfg, result.state, reward_mode, g.fingerprint(), vocab_checksum(ents, rels), true};
  AgentCheckpoint best = last;
  best.state.params = result.result.best;
  run.write("agent.json", save_agent(best));
  run.write("agent_last.json", save_agent(last));
  run.write("train.log", log);
  std::string summary = "best_epoch=" + std::to_string(result.result.best_epoch) + '\n';
  if (!dev.empty()) {
    auto report = evaluate_agent(result.result.best, g, a.cfg.horizon, dev, a.cfg.beam_width, RankMode::Filtered, known);
    summary += format_report_kv(report);
    std::cout << format_report_table(report, "dev " + reward_mode);
  }
  run.write("summary.txt", summary);
  run.finish();
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string agent, shaper, graph, test, mode = "filtered";
  std::vector<std::string> known;
  VocabPaths vocab;
  std::int32_t beam = 0;
  bool restrict_queries = true;
};

void setup_eval(Command& c, EvalArgs& a) {
  c.option("--agent", a.agent, "Agent checkpoint");
  c.option("--shaper", a.shaper, "Shaper checkpoint (ranks every entity by score)");
  c.option("--graph", a.graph, "Graph the agent walks (required with --agent)");
  c.option("--test", a.test, "Triples to answer")->required();
  c.option("--entities", a.vocab.entities, "Entity vocabulary (default: next to --graph or --test)");
  c.option("--relations", a.vocab.relations, "Relation vocabulary (default: next to --graph or --test)");
  c.option("--known", a.known, "Extra triple files treated as known answers when filtering");
  c.option("--mode", a.mode, "filtered or raw");
  c.option("--beam", a.beam, "Beam width (0: the agent's configured width)");
  c.flag("--restrict-queries,!--all-queries", a.restrict_queries,
         "With --agent, only answer triples whose head and tail occur in --graph (default: on)");
}

void cmd_eval(const Command& c, const EvalArgs& a) {
  if (a.agent.empty() == a.shaper.empty()) fail(ErrorKind::Validation, "give exactly one of --agent and --shaper");
  if (!a.agent.empty() && a.graph.empty()) fail(ErrorKind::Validation, "--agent needs --graph");
  if (a.beam < 0) fail(ErrorKind::Validation, "--beam must be non-negative");
  const auto mode = parse_rank_mode(a.mode);
  Run run(c);
  auto [ents, rels] = load_vocab(run, a.vocab, a.graph.empty() ? a.test : a.graph);
  auto test = load_triples(run, a.test, ents, rels);
  KnownAnswers known;
  known.add(test);
  for (const auto& path : a.known) known.add(load_triples(run, path, ents, rels));

  RankingReport report;
  std::string label;
  if (!a.agent.empty()) {
    auto ck = load_agent(run.input(a.agent));
    require_vocab(ck.vocab_sha, ents, rels, "agent checkpoint");
    Graph g(ents.size(), rels.size(), load_triples(run, a.graph, ents, rels),
            {.self_loops = true, .inverses = ck.inverses});
    if (ck.graph_fingerprint != g.fingerprint())
      fail(ErrorKind::Incompatible, "agent checkpoint was trained on a different graph");
    known.add(g.facts());
    if (a.restrict_queries) test = restrict_to_graph(test, g);
    if (test.empty()) fail(ErrorKind::Evaluation, "no test triples left to answer");
    const auto beam = a.beam > 0 ? a.beam : ck.config.beam_width;
    report = evaluate_agent(ck.state.params, g, ck.config.horizon, test, beam, mode, known);
    label = "agent " + ck.reward_mode;
  } else {
    auto loaded = load_shaper(run.input(a.shaper));
    require_vocab(loaded.vocab_sha, ents, rels, "shaper checkpoint");
    if (!a.graph.empty()) known.add(load_triples(run, a.graph, ents, rels));
    report = evaluate_shaper(loaded.model, test, mode, known);
    label = std::string("shaper ") + to_string(loaded.model.kind);
  }
  run.write("report.txt", report_file(report));
  run.write("ranks.tsv", ranks_file(report, ents, rels));
  run.finish();
  std::cout << format_report_table(report, label);
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io: return 2;
    case ErrorKind::Incompatible: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgwalk: reward-shaped multi-hop reasoning over knowledge graphs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file or run manifest (flags take precedence)");

  SplitArgs split_args;
  ShaperArgs shaper_args;
  ExportArgs export_args;
  AgentArgs agent_args;
  EvalArgs eval_args;
  Command split(app, "split", "Mask entities and facts of a graph into a sparse graph");
  Command train_shaper(app, "train-shaper", "Train a DistMult or ComplEx reward shaper");
  Command export_scores(app, "export-scores", "Materialise shaper scores as a score table");
  Command train_agent(app, "train-agent", "Train a walk agent with REINFORCE");
  Command eval(app, "eval", "Rank test answers with an agent or a shaper");
  setup_split(split, split_args);
  setup_train_shaper(train_shaper, shaper_args);
  setup_export(export_scores, export_args);
  setup_train_agent(train_agent, agent_args);
  setup_eval(eval, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (split.app()->parsed()) cmd_split(split, split_args);
    else if (train_shaper.app()->parsed()) cmd_train_shaper(train_shaper, shaper_args);
    else if (export_scores.app()->parsed()) cmd_export(export_scores, export_args);
    else if (train_agent.app()->parsed()) cmd_train_agent(train_agent, agent_args);
    else if (eval.app()->parsed()) cmd_eval(eval, eval_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
