#pragma once

// JSON checkpoints for shaper models and agent training state. Doubles are
// written in shortest round-trip form, so save/load is exact.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "kgwalk/error.hpp"
#include "kgwalk/reinforce.hpp"
#include "kgwalk/shaper.hpp"
#include "kgwalk/tensor.hpp"
#include "kgwalk/triples.hpp"

namespace kgwalk {

using json = nlohmann::json;

constexpr int kFormatVersion = 1;

inline json to_json(const Matrix& m) { return json{{"shape", {m.rows, m.cols}}, {"data", m.data}}; }

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  try {
    Matrix m;
    m.rows = j.at("shape").at(0).get<std::int32_t>();
    m.cols = j.at("shape").at(1).get<std::int32_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.rows < 0 || m.cols < 0 ||
        m.data.size() != static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols))
      fail(ErrorKind::Format, "tensor '" + name + "' has inconsistent shape");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "tensor '" + name + "': " + e.what());
  }
}

inline json to_json(const Rng& r) { return json{{"key", r.key()}, {"counter", r.counter()}}; }
inline Rng rng_from_json(const json& j) {
  return Rng(j.at("key").get<std::uint64_t>(), j.at("counter").get<std::uint64_t>());
}

inline json to_json(const TrainConfig& c) {
  return json{{"dim", c.dim},         {"learning_rate", c.learning_rate},     {"epochs", c.epochs},
              {"batch_size", c.batch_size}, {"label_smoothing", c.label_smoothing}, {"l2", c.l2},
              {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.dim = j.at("dim").get<std::int32_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::int32_t>();
  c.batch_size = j.at("batch_size").get<std::int32_t>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json to_json(const AgentConfig& c) {
  return json{{"entity_dim", c.policy.entity_dim},
              {"hidden_dim", c.policy.hidden_dim},
              {"horizon", c.horizon},
              {"learning_rate", c.learning_rate},
              {"entropy_weight", c.entropy_weight},
              {"entropy_decay", c.entropy_decay},
              {"entropy_decay_every", c.entropy_decay_every},
              {"baseline_decay", c.baseline_decay},
              {"epochs", c.epochs},
              {"batch", c.batch},
              {"rollouts_per_query", c.rollouts_per_query},
              {"beam_width", c.beam_width},
              {"eval_every", c.eval_every},
              {"hide_query_edge", c.hide_query_edge},
              {"seed", c.seed}};
}

inline AgentConfig agent_config_from_json(const json& j) {
  AgentConfig c;
  c.policy.entity_dim = j.at("entity_dim").get<std::int32_t>();
  c.policy.hidden_dim = j.at("hidden_dim").get<std::int32_t>();
  c.horizon = j.at("horizon").get<std::int32_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.entropy_weight = j.at("entropy_weight").get<double>();
  c.entropy_decay = j.at("entropy_decay").get<double>();
  c.entropy_decay_every = j.at("entropy_decay_every").get<std::int32_t>();
  c.baseline_decay = j.at("baseline_decay").get<double>();
  c.epochs = j.at("epochs").get<std::int32_t>();
  c.batch = j.at("batch").get<std::int32_t>();
  c.rollouts_per_query = j.at("rollouts_per_query").get<std::int32_t>();
  c.beam_width = j.at("beam_width").get<std::int32_t>();
  c.eval_every = j.at("eval_every").get<std::int32_t>();
  c.hide_query_edge = j.at("hide_query_edge").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace detail {

inline json parse_checkpoint(const std::string& text, const char* kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || j["format_version"] != kFormatVersion)
    fail(ErrorKind::Format, "unsupported checkpoint format_version");
  if (j.value("kind", "") != kind) fail(ErrorKind::Format, std::string("checkpoint is not a ") + kind + " checkpoint");
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------- shaper

inline std::string save_shaper(const ShaperModel& m, const TrainConfig& cfg, const std::string& vocab_sha) {
  json j{{"format_version", kFormatVersion},
         {"kind", "shaper"},
         {"model", to_string(m.kind)},
         {"dim", m.dim},
         {"trained_on", m.trained_on},
         {"vocab_sha", vocab_sha},
         {"config", to_json(cfg)},
         {"loss_curve", m.loss_curve},
         {"tensors", {{"entity", to_json(m.entity)}, {"relation", to_json(m.relation)}}}};
  return j.dump() + "\n";
}

struct LoadedShaper {
  ShaperModel model;
  TrainConfig config;
  std::string vocab_sha;
};

inline LoadedShaper load_shaper(const std::string& text) {
  json j = detail::parse_checkpoint(text, "shaper");
  try {
    LoadedShaper out;
    auto& m = out.model;
    m.kind = parse_shaper_kind(j.at("model").get<std::string>());
    m.dim = j.at("dim").get<std::int32_t>();
    m.trained_on = j.at("trained_on").get<std::string>();
    m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    m.entity = matrix_from_json(j.at("tensors").at("entity"), "entity");
    m.relation = matrix_from_json(j.at("tensors").at("relation"), "relation");
    if (m.entity.cols != m.width() || m.relation.cols != m.width())
      fail(ErrorKind::Format, "shaper tensor widths do not match the model kind and dim");
    out.config = train_config_from_json(j.at("config"));
    out.vocab_sha = j.at("vocab_sha").get<std::string>();
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed shaper checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------- agent

inline json params_to_json(const PolicyParams& p) {
  json t = json::object();
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) t[PolicyParams::kNames[i]] = to_json(*ts[i]);
  return t;
}

inline PolicyParams params_from_json(const json& j) {
  PolicyParams p;
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i)
    *ts[i] = matrix_from_json(j.at(PolicyParams::kNames[i]), PolicyParams::kNames[i]);
  const auto dp = p.entity.cols, dh = p.cell_rec.rows;
  if (p.relation.cols != dp || p.cell_in.rows != dh || p.cell_in.cols != 2 * dp || p.cell_rec.cols != dh ||
      p.cell_bias.rows != 1 || p.cell_bias.cols != dh || p.proj.rows != 2 * dp || p.proj.cols != dh + 2 * dp)
    fail(ErrorKind::Format, "policy tensor shapes are inconsistent");
  return p;
}

struct AgentCheckpoint {
  AgentConfig config;
  TrainState state;
  std::string reward_mode;
  std::string graph_fingerprint;
  std::string vocab_sha;
  bool inverses = true;
};

inline std::string save_agent(const AgentCheckpoint& ck) {
  const auto& s = ck.state;
  json m = json::array(), v = json::array();
  for (const auto& x : s.optimizer.m) m.push_back(to_json(x));
  for (const auto& x : s.optimizer.v) v.push_back(to_json(x));
  json j{{"format_version", kFormatVersion},
         {"kind", "policy"},
         {"config", to_json(ck.config)},
         {"reward_mode", ck.reward_mode},
         {"graph_fingerprint", ck.graph_fingerprint},
         {"vocab_sha", ck.vocab_sha},
         {"inverses", ck.inverses},
         {"epoch", s.epoch},
         {"baseline", s.baseline},
         {"rng", {{"rollout", to_json(s.rollout_rng)}, {"order", to_json(s.order_rng)}}},
         {"order", s.order},
         {"cursor", s.cursor},
         {"adam", {{"step", s.optimizer.step}, {"lr", s.optimizer.lr}, {"m", m}, {"v", v}}},
         {"tensors", params_to_json(s.params)}};
  return j.dump() + "\n";
}

inline AgentCheckpoint load_agent(const std::string& text) {
  json j = detail::parse_checkpoint(text, "policy");
  try {
    AgentCheckpoint ck;
    ck.config = agent_config_from_json(j.at("config"));
    ck.reward_mode = j.at("reward_mode").get<std::string>();
    ck.graph_fingerprint = j.at("graph_fingerprint").get<std::string>();
    ck.vocab_sha = j.at("vocab_sha").get<std::string>();
    ck.inverses = j.at("inverses").get<bool>();
    auto& s = ck.state;
    s.epoch = j.at("epoch").get<std::int64_t>();
    s.baseline = j.at("baseline").get<double>();
    s.rollout_rng = rng_from_json(j.at("rng").at("rollout"));
    s.order_rng = rng_from_json(j.at("rng").at("order"));
    s.order = j.at("order").get<std::vector<std::size_t>>();
    s.cursor = j.at("cursor").get<std::size_t>();
    s.params = params_from_json(j.at("tensors"));
    const auto& adam = j.at("adam");
    s.optimizer.step = adam.at("step").get<std::int64_t>();
    s.optimizer.lr = adam.at("lr").get<double>();
    for (const auto& x : adam.at("m")) s.optimizer.m.push_back(matrix_from_json(x, "adam.m"));
    for (const auto& x : adam.at("v")) s.optimizer.v.push_back(matrix_from_json(x, "adam.v"));
    return ck;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed policy checkpoint: ") + e.what());
  }
}

}  // namespace kgwalk
