#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/sha256.hpp"
#include "kgwalk/triples.hpp"

namespace kgwalk {

struct Edge {
  RelationId relation = 0;
  EntityId target = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct GraphOptions {
  bool self_loops = true;
  bool inverses = true;
};

// Immutable adjacency-indexed triple store.
//
// Relation id layout, for R original relations:
//   [0, R)       original relations
//   [R, 2R)      inverse of r is R + r      (only when inverses are on)
//   SELF_LOOP    next id after the above
//   NO_OP        SELF_LOOP + 1, the "previous action" at t = 0
//
// Only original facts are members of the fact set; augmented edges exist in
// the adjacency lists and nowhere else.
class Graph {
 public:
  Graph() = default;

  Graph(std::int32_t num_entities, std::int32_t num_relations, std::vector<Triple> facts,
        GraphOptions options = {})
      : num_entities_(num_entities), num_relations_(num_relations), options_(options) {
    if (num_entities < 0 || num_relations < 0) fail(ErrorKind::Validation, "negative vocabulary size");
    for (const auto& t : facts) {
      if (t.head < 0 || t.head >= num_entities || t.tail < 0 || t.tail >= num_entities ||
          t.relation < 0 || t.relation >= num_relations)
        fail(ErrorKind::Validation, "triple (" + std::to_string(t.head) + "," + std::to_string(t.relation) +
                                        "," + std::to_string(t.tail) + ") has an id out of range");
    }
    std::sort(facts.begin(), facts.end());
    facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
    facts_ = std::move(facts);

    self_loop_ = options_.inverses ? 2 * num_relations_ : num_relations_;
    no_op_ = self_loop_ + 1;

    std::vector<std::vector<Edge>> adj(static_cast<std::size_t>(num_entities_));
    for (const auto& t : facts_) {
      adj[t.head].push_back({t.relation, t.tail});
      if (options_.inverses) adj[t.tail].push_back({inverse_of(t.relation), t.head});
    }
    offsets_.assign(static_cast<std::size_t>(num_entities_) + 1, 0);
    for (EntityId e = 0; e < num_entities_; ++e) {
      auto& list = adj[e];
      if (options_.self_loops) list.push_back({self_loop_, e});
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
      offsets_[e + 1] = offsets_[e] + list.size();
    }
    edges_.reserve(offsets_.back());
    for (auto& list : adj) edges_.insert(edges_.end(), list.begin(), list.end());
  }

  std::int32_t num_entities() const noexcept { return num_entities_; }
  std::int32_t num_relations() const noexcept { return num_relations_; }
  // Size of the relation id space including inverse and reserved ids.
  std::int32_t num_relation_ids() const noexcept { return no_op_ + 1; }
  const GraphOptions& options() const noexcept { return options_; }

  RelationId self_loop() const noexcept { return self_loop_; }
  RelationId no_op() const noexcept { return no_op_; }
  RelationId inverse_of(RelationId r) const noexcept { return num_relations_ + r; }
  bool is_original(RelationId r) const noexcept { return r >= 0 && r < num_relations_; }

  bool valid_entity(EntityId e) const noexcept { return e >= 0 && e < num_entities_; }

  // Sorted by (head, relation, tail); original facts only.
  const std::vector<Triple>& facts() const noexcept { return facts_; }
  std::size_t num_facts() const noexcept { return facts_.size(); }

  bool contains(const Triple& t) const noexcept {
    if (!is_original(t.relation)) return false;
    return std::binary_search(facts_.begin(), facts_.end(), t);
  }

  // Facts with the given head and relation, sorted by tail.
  std::span<const Triple> answers(EntityId head, RelationId relation) const noexcept {
    auto lo = std::lower_bound(facts_.begin(), facts_.end(), Triple{head, relation, 0});
    auto hi = std::lower_bound(lo, facts_.end(), Triple{head, relation + 1, 0});
    return {lo, hi};
  }

  // Outgoing edges sorted by (relation, target).
  std::span<const Edge> actions_of(EntityId e) const {
    if (!valid_entity(e)) fail(ErrorKind::Query, "entity id " + std::to_string(e) + " out of range");
    return {edges_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]};
  }

  // Stable hash of the fact set and vocabulary sizes.
  std::string fingerprint() const {
    Sha256 h;
    h.update(std::to_string(num_entities_) + " " + std::to_string(num_relations_) + "\n");
    for (const auto& t : facts_)
      h.update(std::to_string(t.head) + "\t" + std::to_string(t.relation) + "\t" + std::to_string(t.tail) + "\n");
    return h.hex();
  }

  // Human-readable relation name including augmented ids.
  std::string relation_label(RelationId r, const Vocab& relations) const {
    if (is_original(r)) return relations.name(r);
    if (r == self_loop_) return "_self_loop";
    if (r == no_op_) return "_no_op";
    if (options_.inverses && r >= num_relations_ && r < 2 * num_relations_)
      return "_inv_" + relations.name(r - num_relations_);
    return "_unknown_" + std::to_string(r);
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.num_entities_ == b.num_entities_ && a.num_relations_ == b.num_relations_ &&
           a.options_.self_loops == b.options_.self_loops && a.options_.inverses == b.options_.inverses &&
           a.facts_ == b.facts_ && a.edges_ == b.edges_ && a.offsets_ == b.offsets_;
  }

 private:
  std::int32_t num_entities_ = 0;
  std::int32_t num_relations_ = 0;
  GraphOptions options_;
  RelationId self_loop_ = 0;
  RelationId no_op_ = 1;
  std::vector<Triple> facts_;
  std::vector<std::size_t> offsets_ = {0};
  std::vector<Edge> edges_;
};

inline Graph build_graph(const Vocab& entities, const Vocab& relations, std::vector<Triple> triples,
                         GraphOptions options = {}) {
  return Graph(entities.size(), relations.size(), std::move(triples), options);
}

}  // namespace kgwalk
