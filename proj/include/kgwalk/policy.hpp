#pragma once

// Recurrent walk policy.
//
// At step t, with previous action relation r_{t-1} (NO_OP at t = 0), current
// entity e_t and query relation r_q:
//
//   x_t   = [rel(r_{t-1}); ent(e_t)]
//   h_t   = tanh(W_in x_t + W_rec h_{t-1} + b)          h_{-1} = 0
//   q_t   = W_proj [h_t; ent(e_t); rel(r_q)]             (2 d_p entries)
//   z_k   = <[rel(r_k); ent(e_k)], q_t>                  for each action k
//   pi    = softmax(z)
//
// Gradients are derived by hand and checked against central differences in
// the test suite.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgwalk/env.hpp"
#include "kgwalk/error.hpp"
#include "kgwalk/rng.hpp"
#include "kgwalk/tensor.hpp"

namespace kgwalk {

struct PolicyConfig {
  std::int32_t entity_dim = 32;  // d_p
  std::int32_t hidden_dim = 64;  // d_h
};

struct PolicyParams {
  Matrix entity;     // |E| x d_p
  Matrix relation;   // |R'| x d_p, including inverse / self-loop / no-op ids
  Matrix cell_in;    // d_h x 2 d_p
  Matrix cell_rec;   // d_h x d_h
  Matrix cell_bias;  // 1 x d_h
  Matrix proj;       // 2 d_p x (d_h + 2 d_p)

  static constexpr std::array<const char*, 6> kNames = {"entity",   "relation",  "cell_in",
                                                         "cell_rec", "cell_bias", "proj"};

  std::array<Matrix*, 6> tensors() { return {&entity, &relation, &cell_in, &cell_rec, &cell_bias, &proj}; }
  std::array<const Matrix*, 6> tensors() const {
    return {&entity, &relation, &cell_in, &cell_rec, &cell_bias, &proj};
  }

  std::int32_t entity_dim() const noexcept { return entity.cols; }
  std::int32_t hidden_dim() const noexcept { return cell_rec.rows; }

  // Zeroed parameters with the same shapes.
  PolicyParams zeros_like() const {
    PolicyParams g;
    auto dst = g.tensors();
    auto src = tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = Matrix(src[i]->rows, src[i]->cols);
    return g;
  }

  void zero() {
    for (auto* m : tensors()) m->zero();
  }

  bool all_finite() const {
    for (const auto* m : tensors())
      if (!m->all_finite()) return false;
    return true;
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

inline PolicyParams init_policy(std::int32_t num_entities, std::int32_t num_relation_ids, const PolicyConfig& cfg,
                                Rng rng) {
  if (cfg.entity_dim <= 0 || cfg.hidden_dim <= 0) fail(ErrorKind::Validation, "policy dimensions must be positive");
  const auto dp = cfg.entity_dim, dh = cfg.hidden_dim;
  PolicyParams p;
  p.entity = Matrix(num_entities, dp);
  p.relation = Matrix(num_relation_ids, dp);
  p.cell_in = Matrix(dh, 2 * dp);
  p.cell_rec = Matrix(dh, dh);
  p.cell_bias = Matrix(1, dh);
  p.proj = Matrix(2 * dp, dh + 2 * dp);
  auto glorot = [&](Matrix& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    m.fill_uniform(rng, -a, a);
  };
  glorot(p.entity);
  glorot(p.relation);
  glorot(p.cell_in);
  glorot(p.cell_rec);
  glorot(p.proj);
  return p;
}

inline PolicyParams init_policy(const Graph& g, const PolicyConfig& cfg, Rng rng) {
  return init_policy(g.num_entities(), g.num_relation_ids(), cfg, rng);
}

// Recurrent context carried between steps.
struct WalkerState {
  std::vector<double> hidden;
  RelationId prev_relation = 0;
};

inline WalkerState initial_walker(const PolicyParams& p, const Graph& g) {
  return {std::vector<double>(static_cast<std::size_t>(p.hidden_dim()), 0.0), g.no_op()};
}

// Everything the backward pass needs from one forward step.
struct StepCache {
  RelationId prev_relation = 0;
  EntityId current = 0;
  RelationId query_relation = 0;
  std::vector<double> x, h_prev, h, u, q;
  std::vector<Edge> actions;
  std::vector<double> logits, probs, log_probs;

  double entropy() const {
    double H = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) H -= probs[k] * log_probs[k];
    return H;
  }
};

inline void policy_step(const PolicyParams& p, const WalkerState& walker, EntityId current, RelationId query_relation,
                        std::vector<Edge> actions, StepCache& c) {
  if (actions.empty()) fail(ErrorKind::Input, "empty action list");
  const auto dp = static_cast<std::size_t>(p.entity_dim());
  const auto dh = static_cast<std::size_t>(p.hidden_dim());
  c.prev_relation = walker.prev_relation;
  c.current = current;
  c.query_relation = query_relation;
  c.actions = std::move(actions);

  c.x.resize(2 * dp);
  auto pr = p.relation.row(walker.prev_relation);
  auto ce = p.entity.row(current);
  std::copy(pr.begin(), pr.end(), c.x.begin());
  std::copy(ce.begin(), ce.end(), c.x.begin() + static_cast<std::ptrdiff_t>(dp));

  c.h_prev = walker.hidden;
  c.h.assign(dh, 0.0);
  std::vector<double> tmp(dh);
  matvec(p.cell_in, c.x, c.h);
  matvec(p.cell_rec, c.h_prev, tmp);
  for (std::size_t i = 0; i < dh; ++i) c.h[i] = std::tanh(c.h[i] + tmp[i] + p.cell_bias.data[i]);

  c.u.resize(dh + 2 * dp);
  auto qr = p.relation.row(query_relation);
  std::copy(c.h.begin(), c.h.end(), c.u.begin());
  std::copy(ce.begin(), ce.end(), c.u.begin() + static_cast<std::ptrdiff_t>(dh));
  std::copy(qr.begin(), qr.end(), c.u.begin() + static_cast<std::ptrdiff_t>(dh + dp));

  c.q.resize(2 * dp);
  matvec(p.proj, c.u, c.q);
  std::span<const double> q_rel(c.q.data(), dp), q_ent(c.q.data() + dp, dp);

  c.logits.resize(c.actions.size());
  for (std::size_t k = 0; k < c.actions.size(); ++k)
    c.logits[k] = dot(p.relation.row(c.actions[k].relation), q_rel) + dot(p.entity.row(c.actions[k].target), q_ent);
  softmax(c.logits, c.probs, c.log_probs);
}

inline WalkerState advance(const StepCache& c, std::size_t action_index) {
  return {c.h, c.actions[action_index].relation};
}

// Probability vector over env.actions(state) given the recurrent context.
inline std::vector<double> action_distribution(const PolicyParams& p, const WalkEnv& env, const EpisodeState& state,
                                               const WalkerState& walker) {
  StepCache c;
  policy_step(p, walker, state.current, state.query.relation, env.actions(state), c);
  return c.probs;
}

namespace detail {

// Adds dL/dparams for one step given dL/dlogits and the gradient flowing
// into h_t from the future; returns dL/dh_{t-1}.
inline std::vector<double> step_backward(const PolicyParams& p, const StepCache& c, std::span<const double> dlogits,
                                         std::span<const double> dh_future, PolicyParams& g) {
  const auto dp = static_cast<std::size_t>(p.entity_dim());
  const auto dh = static_cast<std::size_t>(p.hidden_dim());
  std::vector<double> dq(2 * dp, 0.0);
  std::span<double> dq_rel(dq.data(), dp), dq_ent(dq.data() + dp, dp);
  std::span<const double> q_rel(c.q.data(), dp), q_ent(c.q.data() + dp, dp);
  for (std::size_t k = 0; k < c.actions.size(); ++k) {
    const double dz = dlogits[k];
    if (dz == 0.0) continue;
    axpy(dz, p.relation.row(c.actions[k].relation), dq_rel);
    axpy(dz, p.entity.row(c.actions[k].target), dq_ent);
    axpy(dz, q_rel, g.relation.row(c.actions[k].relation));
    axpy(dz, q_ent, g.entity.row(c.actions[k].target));
  }

  outer_acc(dq, c.u, g.proj);
  std::vector<double> du(dh + 2 * dp, 0.0);
  matvec_t_acc(p.proj, dq, du);
  axpy(1.0, std::span<const double>(du.data() + dh, dp), g.entity.row(c.current));
  axpy(1.0, std::span<const double>(du.data() + dh + dp, dp), g.relation.row(c.query_relation));

  std::vector<double> dpre(dh);
  for (std::size_t i = 0; i < dh; ++i) dpre[i] = (du[i] + dh_future[i]) * (1.0 - c.h[i] * c.h[i]);

  outer_acc(dpre, c.x, g.cell_in);
  outer_acc(dpre, c.h_prev, g.cell_rec);
  axpy(1.0, dpre, g.cell_bias.data);

  std::vector<double> dx(2 * dp, 0.0);
  matvec_t_acc(p.cell_in, dpre, dx);
  axpy(1.0, std::span<const double>(dx.data(), dp), g.relation.row(c.prev_relation));
  axpy(1.0, std::span<const double>(dx.data() + dp, dp), g.entity.row(c.current));

  std::vector<double> dh_prev(dh, 0.0);
  matvec_t_acc(p.cell_rec, dpre, dh_prev);
  return dh_prev;
}

}  // namespace detail

// Replays a fixed action sequence and evaluates
//     L = -logp_weight * sum_t log pi(a_t | s_t) - entropy_weight * sum_t H_t
// accumulating dL/dparams into `grad` when given.
inline double trajectory_surrogate(const PolicyParams& p, const WalkEnv& env, const Query& query,
                                   std::span<const std::size_t> action_indices, double logp_weight,
                                   double entropy_weight, PolicyParams* grad) {
  std::vector<StepCache> caches(action_indices.size());
  EpisodeState state = env.reset(query);
  WalkerState walker = initial_walker(p, env.graph());
  double loss = 0.0;
  for (std::size_t t = 0; t < action_indices.size(); ++t) {
    auto& c = caches[t];
    policy_step(p, walker, state.current, query.relation, env.actions(state), c);
    const auto a = action_indices[t];
    if (a >= c.actions.size()) fail(ErrorKind::Action, "replayed action index out of range");
    loss -= logp_weight * c.log_probs[a] + entropy_weight * c.entropy();
    walker = advance(c, a);
    state = env.step(state, a);
  }
  if (!grad) return loss;

  std::vector<double> dh_future(static_cast<std::size_t>(p.hidden_dim()), 0.0);
  std::vector<double> dlogits;
  for (std::size_t t = action_indices.size(); t-- > 0;) {
    const auto& c = caches[t];
    const double H = c.entropy();
    dlogits.assign(c.actions.size(), 0.0);
    for (std::size_t k = 0; k < c.actions.size(); ++k) {
      const double pk = c.probs[k];
      dlogits[k] = logp_weight * (pk - (k == action_indices[t] ? 1.0 : 0.0)) +
                   entropy_weight * pk * (c.log_probs[k] + H);
    }
    dh_future = detail::step_backward(p, c, dlogits, dh_future, *grad);
  }
  return loss;
}

}  // namespace kgwalk
