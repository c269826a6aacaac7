#pragma once

// Embedding reward shapers: DistMult and ComplEx trained with full-entity
// multi-label binary cross-entropy against label-smoothed targets.
//
//   DistMult  f(h,r,t) = sigmoid( sum_i h_i r_i t_i )
//   ComplEx   f(h,r,t) = sigmoid( Re sum_i h_i r_i conj(t_i) )
//
// ComplEx rows store the d real parts followed by the d imaginary parts.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/graph.hpp"
#include "kgwalk/rng.hpp"
#include "kgwalk/tensor.hpp"

namespace kgwalk {

enum class ShaperKind { DistMult, ComplEx };

inline const char* to_string(ShaperKind k) { return k == ShaperKind::DistMult ? "distmult" : "complex"; }

inline ShaperKind parse_shaper_kind(const std::string& s) {
  if (s == "distmult" || s == "DistMult") return ShaperKind::DistMult;
  if (s == "complex" || s == "ComplEx") return ShaperKind::ComplEx;
  fail(ErrorKind::Validation, "unknown shaper model '" + s + "' (expected distmult or complex)");
}

struct TrainConfig {
  std::int32_t dim = 64;
  double learning_rate = 1e-3;
  std::int32_t epochs = 500;
  std::int32_t batch_size = 128;  // (head, relation) pairs per update
  double label_smoothing = 0.1;
  double l2 = 1e-5;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.dim <= 0) fail(ErrorKind::Validation, "dim must be positive");
  if (!(cfg.learning_rate > 0)) fail(ErrorKind::Validation, "learning rate must be positive");
  if (cfg.epochs < 0) fail(ErrorKind::Validation, "epochs must be non-negative");
  if (cfg.batch_size <= 0) fail(ErrorKind::Validation, "batch size must be positive");
  if (!(cfg.label_smoothing >= 0.0 && cfg.label_smoothing < 1.0))
    fail(ErrorKind::Validation, "label smoothing must be in [0,1)");
  if (!(cfg.l2 >= 0.0)) fail(ErrorKind::Validation, "l2 weight must be non-negative");
}

struct ShaperModel {
  ShaperKind kind = ShaperKind::DistMult;
  std::int32_t dim = 0;
  Matrix entity;    // |E| x width()
  Matrix relation;  // |R| x width()
  std::string trained_on;           // graph fingerprint
  std::vector<double> loss_curve;   // full training loss; [0] is at initialisation

  std::int32_t width() const noexcept { return kind == ShaperKind::ComplEx ? 2 * dim : dim; }
  std::int32_t num_entities() const noexcept { return entity.rows; }
  std::int32_t num_relations() const noexcept { return relation.rows; }

  friend bool operator==(const ShaperModel&, const ShaperModel&) = default;
};

// Gradient container with the same shapes as a model's parameters.
struct ShaperGrad {
  Matrix entity;
  Matrix relation;
};

inline ShaperModel init_shaper(ShaperKind kind, std::int32_t num_entities, std::int32_t num_relations,
                               const TrainConfig& cfg) {
  validate(cfg);
  ShaperModel m;
  m.kind = kind;
  m.dim = cfg.dim;
  m.entity = Matrix(num_entities, m.width());
  m.relation = Matrix(num_relations, m.width());
  Rng rng = Rng(cfg.seed).child("shaper.init");
  m.entity.fill_uniform(rng, -0.1, 0.1);
  m.relation.fill_uniform(rng, -0.1, 0.1);
  return m;
}

namespace detail {

// Composes head and relation into the vector q such that the raw score of
// any tail t is <q, t>.
inline void compose_query(const ShaperModel& m, EntityId h, RelationId r, std::span<double> q) {
  auto hv = m.entity.row(h);
  auto rv = m.relation.row(r);
  if (m.kind == ShaperKind::DistMult) {
    for (std::int32_t i = 0; i < m.dim; ++i) q[i] = hv[i] * rv[i];
  } else {
    const auto d = m.dim;
    for (std::int32_t i = 0; i < d; ++i) {
      const double a = hv[i], b = hv[d + i], c = rv[i], e = rv[d + i];
      q[i] = a * c - b * e;      // Re(h r)
      q[d + i] = a * e + b * c;  // Im(h r)
    }
  }
}

// Back-propagates dq (gradient w.r.t. the composed query) into head and
// relation rows.
inline void compose_query_backward(const ShaperModel& m, EntityId h, RelationId r, std::span<const double> dq,
                                   ShaperGrad& g) {
  auto hv = m.entity.row(h);
  auto rv = m.relation.row(r);
  auto gh = g.entity.row(h);
  auto gr = g.relation.row(r);
  if (m.kind == ShaperKind::DistMult) {
    for (std::int32_t i = 0; i < m.dim; ++i) {
      gh[i] += dq[i] * rv[i];
      gr[i] += dq[i] * hv[i];
    }
  } else {
    const auto d = m.dim;
    for (std::int32_t i = 0; i < d; ++i) {
      const double a = hv[i], b = hv[d + i], c = rv[i], e = rv[d + i];
      const double dp = dq[i], dqi = dq[d + i];
      gh[i] += dp * c + dqi * e;
      gh[d + i] += -dp * e + dqi * c;
      gr[i] += dp * a + dqi * b;
      gr[d + i] += -dp * b + dqi * a;
    }
  }
}

inline void check_finite_rows(const ShaperModel& m, EntityId h, RelationId r, EntityId t) {
  auto finite = [](std::span<const double> v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (!finite(m.entity.row(h)) || !finite(m.relation.row(r)) || !finite(m.entity.row(t)))
    fail(ErrorKind::Numeric, "non-finite embedding in shaper model");
}

inline void check_ids(const ShaperModel& m, EntityId h, RelationId r, EntityId t) {
  if (h < 0 || h >= m.num_entities() || t < 0 || t >= m.num_entities() || r < 0 || r >= m.num_relations())
    fail(ErrorKind::Query, "shaper query ids out of range");
}

}  // namespace detail

// Raw composition score before the sigmoid.
inline double raw_score(const ShaperModel& m, EntityId h, RelationId r, EntityId t) {
  detail::check_ids(m, h, r, t);
  detail::check_finite_rows(m, h, r, t);
  std::vector<double> q(static_cast<std::size_t>(m.width()));
  detail::compose_query(m, h, r, q);
  return dot(q, m.entity.row(t));
}

inline double score_triple(const ShaperModel& m, EntityId h, RelationId r, EntityId t) {
  return sigmoid(raw_score(m, h, r, t));
}

// Sigmoid scores of every tail for (h, r).
inline std::vector<double> score_tails(const ShaperModel& m, EntityId h, RelationId r) {
  detail::check_ids(m, h, r, 0);
  std::vector<double> q(static_cast<std::size_t>(m.width()));
  detail::compose_query(m, h, r, q);
  std::vector<double> out(static_cast<std::size_t>(m.num_entities()));
  for (EntityId t = 0; t < m.num_entities(); ++t) {
    out[t] = sigmoid(dot(q, m.entity.row(t)));
    if (!std::isfinite(out[t])) fail(ErrorKind::Numeric, "non-finite shaper score");
  }
  return out;
}

// y' = y (1 - eps) + eps / N
inline std::vector<double> smooth_targets(std::span<const double> one_hot, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) fail(ErrorKind::Validation, "label smoothing must be in [0,1)");
  const double n = static_cast<double>(one_hot.size());
  std::vector<double> out(one_hot.size());
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] != 0.0 && one_hot[i] != 1.0) fail(ErrorKind::Validation, "targets must be 0 or 1");
    out[i] = one_hot[i] * (1.0 - eps) + eps / n;
  }
  return out;
}

// One multi-label training example: a (head, relation) pair and every
// observed tail.
struct LabelledPair {
  EntityId head = 0;
  RelationId relation = 0;
  std::vector<EntityId> tails;
};

inline std::vector<LabelledPair> labelled_pairs(const Graph& g) {
  std::vector<LabelledPair> out;
  for (const auto& t : g.facts()) {
    if (out.empty() || out.back().head != t.head || out.back().relation != t.relation)
      out.push_back({t.head, t.relation, {}});
    out.back().tails.push_back(t.tail);
  }
  return out;
}

// Mean smoothed BCE over (pair, entity) cells of `batch` plus
// 0.5 * l2 * ||params||^2. Accumulates the gradient into `grad` when given.
inline double shaper_loss(const ShaperModel& m, std::span<const LabelledPair> pairs,
                          std::span<const std::size_t> batch, double eps, double l2, ShaperGrad* grad) {
  const auto n_ent = m.num_entities();
  const auto w = static_cast<std::size_t>(m.width());
  if (grad) {
    if (!grad->entity.same_shape(m.entity)) grad->entity = Matrix(m.entity.rows, m.entity.cols);
    if (!grad->relation.same_shape(m.relation)) grad->relation = Matrix(m.relation.rows, m.relation.cols);
  }
  const double scale = 1.0 / (static_cast<double>(batch.size()) * n_ent);
  std::vector<double> q(w), dq(w), y(static_cast<std::size_t>(n_ent));
  double loss = 0.0;
  for (auto idx : batch) {
    const auto& p = pairs[idx];
    std::fill(y.begin(), y.end(), 0.0);
    for (auto t : p.tails) y[t] = 1.0;
    auto target = smooth_targets(y, eps);
    detail::compose_query(m, p.head, p.relation, q);
    std::fill(dq.begin(), dq.end(), 0.0);
    for (EntityId t = 0; t < n_ent; ++t) {
      auto tv = m.entity.row(t);
      const double z = dot(q, tv);
      loss += scale * (softplus(z) - target[t] * z);
      if (grad) {
        const double dz = scale * (sigmoid(z) - target[t]);
        axpy(dz, tv, dq);
        axpy(dz, q, grad->entity.row(t));
      }
    }
    if (grad) detail::compose_query_backward(m, p.head, p.relation, dq, *grad);
  }
  if (l2 > 0) {
    double sq = 0.0;
    for (double x : m.entity.data) sq += x * x;
    for (double x : m.relation.data) sq += x * x;
    loss += 0.5 * l2 * sq;
    if (grad) {
      axpy(l2, m.entity.data, grad->entity.data);
      axpy(l2, m.relation.data, grad->relation.data);
    }
  }
  return loss;
}

inline double full_shaper_loss(const ShaperModel& m, std::span<const LabelledPair> pairs, double eps, double l2) {
  std::vector<std::size_t> all(pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return shaper_loss(m, pairs, all, eps, l2, nullptr);
}

inline ShaperModel train_shaper(const Graph& graph, ShaperKind kind, const TrainConfig& cfg) {
  validate(cfg);
  if (graph.num_facts() == 0) fail(ErrorKind::Validation, "cannot train a shaper on an empty graph");
  ShaperModel m = init_shaper(kind, graph.num_entities(), graph.num_relations(), cfg);
  m.trained_on = graph.fingerprint();
  const auto pairs = labelled_pairs(graph);

  Rng order_rng = Rng(cfg.seed).child("shaper.order");
  Adam opt;
  opt.lr = cfg.learning_rate;
  ShaperGrad grad{Matrix(m.entity.rows, m.entity.cols), Matrix(m.relation.rows, m.relation.cols)};
  Matrix* params[] = {&m.entity, &m.relation};
  const Matrix* grads[] = {&grad.entity, &grad.relation};

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  m.loss_curve.push_back(full_shaper_loss(m, pairs, cfg.label_smoothing, cfg.l2));
  for (std::int32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      grad.entity.zero();
      grad.relation.zero();
      shaper_loss(m, pairs, std::span(order).subspan(start, len), cfg.label_smoothing, cfg.l2, &grad);
      opt.apply(params, grads);
    }
    const double loss = full_shaper_loss(m, pairs, cfg.label_smoothing, cfg.l2);
    if (!std::isfinite(loss)) fail(ErrorKind::Training, "shaper training diverged at epoch " + std::to_string(epoch));
    m.loss_curve.push_back(loss);
  }
  return m;
}

}  // namespace kgwalk
