#pragma once

// Rich/sparse split: mask a fraction of entities (dropping every incident
// fact), then mask a fraction of the surviving facts. Ids are shared between
// the two graphs, so masked entities keep their vocabulary slots.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <iterator>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/graph.hpp"
#include "kgwalk/rng.hpp"

namespace kgwalk {

struct SplitSpec {
  double node_mask_ratio = 0.5;
  double edge_mask_ratio = 0.5;
  std::uint64_t seed = 42;
  std::vector<EntityId> protect;  // never masked
};

struct SplitReport {
  std::int64_t entities_total = 0;
  std::int64_t entities_maskable = 0;
  std::int64_t entities_masked = 0;
  std::int64_t facts_rich = 0;
  std::int64_t facts_removed_by_nodes = 0;
  std::int64_t facts_removed_by_edges = 0;
  std::int64_t facts_sparse = 0;

  friend bool operator==(const SplitReport&, const SplitReport&) = default;
};

struct SplitResult {
  Graph rich;
  Graph sparse;
  std::vector<EntityId> masked_entities;  // sorted
  std::vector<Triple> masked_triples;     // sorted, rich \ sparse
  SplitReport report;

  friend bool operator==(const SplitResult&, const SplitResult&) = default;
};

inline void validate(const SplitSpec& spec) {
  auto check = [](double v, const char* flag) {
    if (!(v >= 0.0 && v <= 1.0))
      fail(ErrorKind::Validation, std::string(flag) + " must be in [0,1], got " + std::to_string(v));
  };
  check(spec.node_mask_ratio, "node-ratio");
  check(spec.edge_mask_ratio, "edge-ratio");
}

namespace detail {

// Partial Fisher-Yates: the first k elements become a uniform k-subset.
template <class T>
void choose_prefix(std::vector<T>& items, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace detail

inline SplitResult mask_split(const Graph& rich, const SplitSpec& spec) {
  validate(spec);
  if (rich.num_facts() == 0) fail(ErrorKind::Validation, "cannot split an empty graph");

  Rng root(spec.seed);
  Rng node_rng = root.child("split.nodes");
  Rng edge_rng = root.child("split.edges");

  std::vector<char> is_protected(static_cast<std::size_t>(rich.num_entities()), 0);
  for (auto e : spec.protect) {
    if (!rich.valid_entity(e)) fail(ErrorKind::Validation, "protected entity id out of range");
    is_protected[e] = 1;
  }
  std::vector<EntityId> maskable;
  for (EntityId e = 0; e < rich.num_entities(); ++e)
    if (!is_protected[e]) maskable.push_back(e);

  const auto node_count =
      static_cast<std::size_t>(std::floor(spec.node_mask_ratio * static_cast<double>(maskable.size())));
  detail::choose_prefix(maskable, node_count, node_rng);
  std::vector<char> masked(static_cast<std::size_t>(rich.num_entities()), 0);
  std::vector<EntityId> masked_entities(maskable.begin(), maskable.begin() + node_count);
  std::sort(masked_entities.begin(), masked_entities.end());
  for (auto e : masked_entities) masked[e] = 1;

  std::vector<Triple> survivors;
  std::int64_t removed_by_nodes = 0;
  for (const auto& t : rich.facts()) {
    if (masked[t.head] || masked[t.tail])
      ++removed_by_nodes;
    else
      survivors.push_back(t);
  }

  const auto edge_count =
      static_cast<std::size_t>(std::floor(spec.edge_mask_ratio * static_cast<double>(survivors.size())));
  detail::choose_prefix(survivors, edge_count, edge_rng);
  std::vector<Triple> kept(survivors.begin() + edge_count, survivors.end());
  if (kept.empty()) fail(ErrorKind::Validation, "degenerate split: sparse graph has no facts");

  SplitResult out;
  out.rich = rich;
  out.sparse = Graph(rich.num_entities(), rich.num_relations(), std::move(kept), rich.options());
  out.masked_entities = std::move(masked_entities);
  std::set_difference(rich.facts().begin(), rich.facts().end(), out.sparse.facts().begin(),
                      out.sparse.facts().end(), std::back_inserter(out.masked_triples));

  auto& r = out.report;
  r.entities_total = rich.num_entities();
  r.entities_maskable = static_cast<std::int64_t>(maskable.size());
  r.entities_masked = static_cast<std::int64_t>(node_count);
  r.facts_rich = static_cast<std::int64_t>(rich.num_facts());
  r.facts_removed_by_nodes = removed_by_nodes;
  r.facts_removed_by_edges = static_cast<std::int64_t>(edge_count);
  r.facts_sparse = static_cast<std::int64_t>(out.sparse.num_facts());
  return out;
}

struct SplitVerification {
  std::int64_t violations = 0;
  std::int64_t entities_kept = 0;  // not masked
  std::int64_t entities_with_facts = 0;
  std::int64_t facts_rich = 0;
  std::int64_t facts_kept = 0;
  std::int64_t queries_total = 0;
  std::int64_t queries_answerable = 0;  // head and answer both unmasked
};

// Throws an integrity error naming the first offending triple.
inline SplitVerification verify_split(const SplitResult& result, std::span<const Triple> queries = {}) {
  const auto& rich = result.rich;
  const auto& sparse = result.sparse;
  auto describe = [](const Triple& t) {
    return "(" + std::to_string(t.head) + "," + std::to_string(t.relation) + "," + std::to_string(t.tail) + ")";
  };
  if (rich.num_entities() != sparse.num_entities() || rich.num_relations() != sparse.num_relations())
    fail(ErrorKind::Integrity, "rich and sparse vocabularies differ in size");

  std::vector<char> masked(static_cast<std::size_t>(rich.num_entities()), 0);
  for (auto e : result.masked_entities) masked[e] = 1;

  std::vector<char> touched(static_cast<std::size_t>(rich.num_entities()), 0);
  for (const auto& t : sparse.facts()) {
    if (!rich.contains(t)) fail(ErrorKind::Integrity, "sparse triple " + describe(t) + " is not a rich fact");
    if (masked[t.head] || masked[t.tail])
      fail(ErrorKind::Integrity, "sparse triple " + describe(t) + " touches a masked entity");
    touched[t.head] = touched[t.tail] = 1;
  }
  for (const auto& t : result.masked_triples) {
    if (sparse.contains(t)) fail(ErrorKind::Integrity, "masked triple " + describe(t) + " is present in sparse");
  }
  if (result.masked_triples.size() + sparse.num_facts() != rich.num_facts())
    fail(ErrorKind::Integrity, "masked and kept facts do not partition the rich facts");

  SplitVerification v;
  v.entities_kept = rich.num_entities() - static_cast<std::int64_t>(result.masked_entities.size());
  v.entities_with_facts = std::count(touched.begin(), touched.end(), 1);
  v.facts_rich = static_cast<std::int64_t>(rich.num_facts());
  v.facts_kept = static_cast<std::int64_t>(sparse.num_facts());
  v.queries_total = static_cast<std::int64_t>(queries.size());
  for (const auto& q : queries)
    if (rich.valid_entity(q.head) && rich.valid_entity(q.tail) && !masked[q.head] && !masked[q.tail])
      ++v.queries_answerable;
  return v;
}

// Line-oriented key=value report.
inline std::string format_split_report(const SplitSpec& spec, const SplitReport& r, const SplitVerification& v) {
  std::ostringstream ss;
  ss << "node_mask_ratio=" << spec.node_mask_ratio << '\n'
     << "edge_mask_ratio=" << spec.edge_mask_ratio << '\n'
     << "seed=" << spec.seed << '\n'
     << "protected=" << spec.protect.size() << '\n'
     << "entities_total=" << r.entities_total << '\n'
     << "entities_maskable=" << r.entities_maskable << '\n'
     << "entities_masked=" << r.entities_masked << '\n'
     << "entities_kept=" << v.entities_kept << '\n'
     << "entities_with_facts=" << v.entities_with_facts << '\n'
     << "facts_rich=" << r.facts_rich << '\n'
     << "facts_removed_by_nodes=" << r.facts_removed_by_nodes << '\n'
     << "facts_removed_by_edges=" << r.facts_removed_by_edges << '\n'
     << "facts_sparse=" << r.facts_sparse << '\n'
     << "queries_total=" << v.queries_total << '\n'
     << "queries_answerable=" << v.queries_answerable << '\n'
     << "violations=" << v.violations << '\n';
  return ss.str();
}

}  // namespace kgwalk
