#pragma once

// Score providers and the score-table interchange format.
//
// Score table file (UTF-8 TSV):
//   #provenance=<model kind or external-lm>
//   #entities=<N>
//   #relations=<M>
//   #vocab_sha=<sha256 of the vocab files>
//   head TAB relation TAB tail TAB score      (score with 6 decimals)
// Every (head, relation) block lists all N tails.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/graph.hpp"
#include "kgwalk/shaper.hpp"
#include "kgwalk/triples.hpp"

namespace kgwalk {

// f(e_s, r, e_t) in [0,1].
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual double score(EntityId head, RelationId relation, EntityId tail) const = 0;
  virtual std::string provenance() const = 0;
};

class EmbeddingScorer final : public ScoreProvider {
 public:
  explicit EmbeddingScorer(const ShaperModel& model) : model_(&model) {}
  double score(EntityId h, RelationId r, EntityId t) const override { return score_triple(*model_, h, r, t); }
  std::string provenance() const override { return to_string(model_->kind); }

 private:
  const ShaperModel* model_;
};

class ConstantScorer final : public ScoreProvider {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(EntityId, RelationId, EntityId) const override { return value_; }
  std::string provenance() const override { return "constant"; }

 private:
  double value_;
};

enum class MissingPolicy { Error, Zero };

class ScoreTable final : public ScoreProvider {
 public:
  ScoreTable() = default;
  ScoreTable(std::int32_t num_entities, std::string provenance)
      : num_entities_(num_entities), provenance_(std::move(provenance)) {}

  void set(EntityId head, RelationId relation, std::vector<double> scores) {
    if (static_cast<std::int32_t>(scores.size()) != num_entities_)
      fail(ErrorKind::Format, "score vector length differs from entity count");
    for (double s : scores)
      if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::Format, "score outside [0,1]");
    entries_[{head, relation}] = std::move(scores);
  }

  bool has(EntityId head, RelationId relation) const { return entries_.contains({head, relation}); }

  const std::vector<double>* find(EntityId head, RelationId relation) const {
    auto it = entries_.find({head, relation});
    return it == entries_.end() ? nullptr : &it->second;
  }

  double score(EntityId h, RelationId r, EntityId t) const override {
    const auto* row = find(h, r);
    if (!row) {
      if (missing_ == MissingPolicy::Zero) return 0.0;
      fail(ErrorKind::Query, "score table has no entry for (" + std::to_string(h) + ", " + std::to_string(r) + ")");
    }
    if (t < 0 || t >= num_entities_) fail(ErrorKind::Query, "tail id out of range");
    return (*row)[t];
  }

  std::string provenance() const override { return provenance_; }
  std::int32_t num_entities() const noexcept { return num_entities_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::pair<EntityId, RelationId>, std::vector<double>>& entries() const noexcept { return entries_; }

  void set_missing_policy(MissingPolicy p) noexcept { missing_ = p; }
  MissingPolicy missing_policy() const noexcept { return missing_; }

 private:
  std::int32_t num_entities_ = 0;
  std::string provenance_;
  std::map<std::pair<EntityId, RelationId>, std::vector<double>> entries_;
  MissingPolicy missing_ = MissingPolicy::Error;
};

// Distinct (head, relation) pairs of a triple list, sorted.
inline std::vector<std::pair<EntityId, RelationId>> query_pairs(std::span<const Triple> triples) {
  std::vector<std::pair<EntityId, RelationId>> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.emplace_back(t.head, t.relation);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline ScoreTable materialize(const ShaperModel& model, std::span<const std::pair<EntityId, RelationId>> pairs) {
  ScoreTable table(model.num_entities(), to_string(model.kind));
  for (auto [h, r] : pairs) table.set(h, r, score_tails(model, h, r));
  return table;
}

inline std::string format_score_table(const ScoreTable& table, const Vocab& entities, const Vocab& relations) {
  if (table.num_entities() != entities.size())
    fail(ErrorKind::Incompatible, "score table entity count differs from the vocabulary");
  std::string out;
  out += "#provenance=" + table.provenance() + "\n";
  out += "#entities=" + std::to_string(entities.size()) + "\n";
  out += "#relations=" + std::to_string(relations.size()) + "\n";
  out += "#vocab_sha=" + vocab_checksum(entities, relations) + "\n";
  char buf[32];
  for (const auto& [key, scores] : table.entries()) {
    const auto& head = entities.name(key.first);
    const auto& rel = relations.name(key.second);
    for (EntityId t = 0; t < table.num_entities(); ++t) {
      std::snprintf(buf, sizeof buf, "%.6f", scores[t]);
      out += head;
      out += '\t';
      out += rel;
      out += '\t';
      out += entities.name(t);
      out += '\t';
      out += buf;
      out += '\n';
    }
  }
  return out;
}

inline ScoreTable parse_score_table(std::string_view text, const Vocab& entities, const Vocab& relations) {
  std::map<std::string, std::string> header;
  std::map<std::pair<EntityId, RelationId>, std::vector<double>> rows;
  std::map<std::pair<EntityId, RelationId>, std::vector<char>> seen;
  bool body_started = false;
  detail::for_each_line(text, [&](std::size_t lineno, std::string_view line) {
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '#') {
      if (body_started) fail(ErrorKind::Format, where + "header line after body");
      auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::Format, where + "malformed header");
      header[std::string(line.substr(1, eq - 1))] = std::string(line.substr(eq + 1));
      return;
    }
    if (!body_started) {
      body_started = true;
      for (const char* key : {"provenance", "entities", "relations", "vocab_sha"})
        if (!header.contains(key)) fail(ErrorKind::Format, std::string("missing header #") + key);
      if (header["entities"] != std::to_string(entities.size()) ||
          header["relations"] != std::to_string(relations.size()))
        fail(ErrorKind::Incompatible, "score table vocabulary sizes differ from the loaded vocabularies");
      if (header["vocab_sha"] != vocab_checksum(entities, relations))
        fail(ErrorKind::Incompatible, "score table vocab checksum mismatch");
    }
    auto fields = detail::split_tabs(line);
    if (fields.size() != 4) fail(ErrorKind::Format, where + "expected 4 tab-separated fields");
    auto h = entities.find(fields[0]);
    auto r = relations.find(fields[1]);
    auto t = entities.find(fields[2]);
    if (!h || !r || !t) fail(ErrorKind::Format, where + "unknown name");
    double s = 0.0;
    auto sv = fields[3];
    auto res = std::from_chars(sv.data(), sv.data() + sv.size(), s);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size() || !std::isfinite(s))
      fail(ErrorKind::Format, where + "bad score '" + std::string(sv) + "'");
    if (s < 0.0 || s > 1.0) fail(ErrorKind::Format, where + "score " + std::string(sv) + " outside [0,1]");
    auto key = std::make_pair(*h, *r);
    auto& row = rows[key];
    auto& mark = seen[key];
    if (row.empty()) {
      row.assign(static_cast<std::size_t>(entities.size()), 0.0);
      mark.assign(static_cast<std::size_t>(entities.size()), 0);
    }
    if (mark[*t]) fail(ErrorKind::Format, where + "duplicate row");
    mark[*t] = 1;
    row[*t] = s;
  });
  if (!body_started) {
    for (const char* key : {"provenance", "entities", "relations", "vocab_sha"})
      if (!header.contains(key)) fail(ErrorKind::Format, std::string("missing header #") + key);
    if (header["vocab_sha"] != vocab_checksum(entities, relations))
      fail(ErrorKind::Incompatible, "score table vocab checksum mismatch");
  }
  ScoreTable table(entities.size(), header["provenance"]);
  for (auto& [key, row] : rows) {
    const auto& mark = seen[key];
    if (std::count(mark.begin(), mark.end(), 1) != entities.size())
      fail(ErrorKind::Format, "incomplete score block for (" + entities.name(key.first) + ", " +
                                  relations.name(key.second) + ")");
    table.set(key.first, key.second, std::move(row));
  }
  return table;
}

inline ScoreTable load_scores(const std::string& path, const Vocab& entities, const Vocab& relations) {
  return parse_score_table(read_text_file(path), entities, relations);
}

// R = R_b + (1 - R_b) f: exactly 1 on observed facts, f elsewhere.
inline double shaped_reward(const ScoreProvider& shaper, const Graph& graph, EntityId source, RelationId relation,
                            EntityId end) {
  if (graph.contains({source, relation, end})) return 1.0;
  const double f = shaper.score(source, relation, end);
  if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::Numeric, "shaper score outside [0,1]");
  return f;
}

}  // namespace kgwalk
