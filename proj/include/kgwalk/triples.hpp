#pragma once

// Vocabularies, triples and the TSV triple format.
//
// Triple file: UTF-8, one fact per line, `head TAB relation TAB tail`, no
// header, no escaping. Vocab file: one name per line, line number = id.

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/sha256.hpp"

namespace kgwalk {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> names) {
    for (auto& n : names) {
      if (index_.contains(n)) fail(ErrorKind::Parse, "duplicate vocabulary name '" + n + "'");
      intern(n);
    }
  }

  std::int32_t intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    auto id = static_cast<std::int32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::int32_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Unknown names are a hard error.
  std::int32_t at(std::string_view name) const {
    auto id = find(name);
    if (!id) fail(ErrorKind::Query, "unknown name '" + std::string(name) + "'");
    return *id;
  }

  const std::string& name(std::int32_t id) const {
    if (!contains(id)) fail(ErrorKind::Query, "id " + std::to_string(id) + " out of range");
    return names_[static_cast<std::size_t>(id)];
  }

  bool contains(std::int32_t id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < names_.size();
  }
  std::int32_t size() const noexcept { return static_cast<std::int32_t>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  void write(std::ostream& out) const {
    for (const auto& n : names_) out << n << '\n';
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

namespace detail {

// Calls fn(line_number, line) for each non-empty line; strips a trailing CR.
template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(lineno, line);
    pos = end + 1;
  }
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

// Injective for ids below 2^21.
inline std::uint64_t triple_key(const Triple& t) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.head)) << 42) ^
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 21) ^
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.tail));
}

}  // namespace detail

inline Vocab parse_vocab(std::string_view text) {
  std::vector<std::string> names;
  detail::for_each_line(text, [&](std::size_t, std::string_view line) { names.emplace_back(line); });
  return Vocab(std::move(names));
}

inline Vocab read_vocab(const std::string& path) { return parse_vocab(read_text_file(path)); }

enum class VocabPolicy {
  Intern,  // new names are appended to the vocabularies
  Strict,  // new names are a query error
};

struct TripleList {
  std::vector<Triple> triples;  // file order, deduplicated
  std::size_t duplicates = 0;
};

inline TripleList parse_triples_into(std::string_view text, Vocab& entities, Vocab& relations,
                                     VocabPolicy policy) {
  TripleList out;
  std::unordered_set<std::uint64_t> seen;
  detail::for_each_line(text, [&](std::size_t lineno, std::string_view line) {
    auto fields = detail::split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                                 std::to_string(fields.size()));
    Triple t;
    if (policy == VocabPolicy::Intern) {
      t.head = entities.intern(fields[0]);
      t.relation = relations.intern(fields[1]);
      t.tail = entities.intern(fields[2]);
    } else {
      auto where = [&](const char* what, std::string_view name) {
        return "line " + std::to_string(lineno) + ": unknown " + what + " '" + std::string(name) + "'";
      };
      auto h = entities.find(fields[0]);
      auto r = relations.find(fields[1]);
      auto tl = entities.find(fields[2]);
      if (!h) fail(ErrorKind::Query, where("entity", fields[0]));
      if (!r) fail(ErrorKind::Query, where("relation", fields[1]));
      if (!tl) fail(ErrorKind::Query, where("entity", fields[2]));
      t = Triple{*h, *r, *tl};
    }
    if (seen.insert(detail::triple_key(t)).second)
      out.triples.push_back(t);
    else
      ++out.duplicates;
  });
  return out;
}

struct ParsedTriples {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> triples;
  std::size_t duplicates = 0;
};

// Vocabularies are interned in first-appearance order.
inline ParsedTriples parse_triples(std::string_view text) {
  ParsedTriples p;
  auto list = parse_triples_into(text, p.entities, p.relations, VocabPolicy::Intern);
  p.triples = std::move(list.triples);
  p.duplicates = list.duplicates;
  return p;
}

inline void write_triples(std::ostream& out, const std::vector<Triple>& triples, const Vocab& entities,
                          const Vocab& relations) {
  for (const auto& t : triples)
    out << entities.name(t.head) << '\t' << relations.name(t.relation) << '\t' << entities.name(t.tail) << '\n';
}

inline std::string format_triples(const std::vector<Triple>& triples, const Vocab& entities,
                                  const Vocab& relations) {
  std::ostringstream ss;
  write_triples(ss, triples, entities, relations);
  return ss.str();
}

// SHA-256 over the entity vocab file bytes followed by the relation vocab
// file bytes (each name terminated by LF).
inline std::string vocab_checksum(const Vocab& entities, const Vocab& relations) {
  Sha256 h;
  for (const auto& n : entities.names()) h.update(n).update("\n");
  for (const auto& n : relations.names()) h.update(n).update("\n");
  return h.hex();
}

}  // namespace kgwalk
