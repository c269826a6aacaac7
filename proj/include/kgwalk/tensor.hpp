#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kgwalk/error.hpp"
#include "kgwalk/rng.hpp"

namespace kgwalk {

// Dense row-major matrix of doubles.
struct Matrix {
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int32_t r, std::int32_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  std::span<double> row(std::int32_t i) {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(std::int32_t i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  double& operator()(std::int32_t i, std::int32_t j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(std::int32_t i, std::int32_t j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  std::size_t size() const noexcept { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool same_shape(const Matrix& o) const noexcept { return rows == o.rows && cols == o.cols; }

  bool all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
  }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (auto& x : data) x = rng.uniform(lo, hi);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// out = M * x  (M is rows x cols, x has cols entries)
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::int32_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), x);
}

// out += M^T * y
inline void matvec_t_acc(const Matrix& m, std::span<const double> y, std::span<double> out) {
  for (std::int32_t i = 0; i < m.rows; ++i) axpy(y[i], m.row(i), out);
}

// G += y x^T
inline void outer_acc(std::span<const double> y, std::span<const double> x, Matrix& g) {
  for (std::int32_t i = 0; i < g.rows; ++i) axpy(y[i], x, g.row(i));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Numerically stable softmax; also returns log-probabilities.
inline void softmax(std::span<const double> logits, std::vector<double>& probs, std::vector<double>& log_probs) {
  if (logits.empty()) fail(ErrorKind::Input, "softmax of an empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  probs.resize(logits.size());
  log_probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    log_probs[i] = logits[i] - log_z;
    probs[i] = std::exp(log_probs[i]);
  }
}

// Adam with a constant step size.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void apply(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (m.empty()) {
      for (auto* p : params) {
        m.emplace_back(p->rows, p->cols);
        v.emplace_back(p->rows, p->cols);
      }
    }
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k]->data;
      const auto& g = grads[k]->data;
      auto& mk = m[k].data;
      auto& vk = v[k].data;
      for (std::size_t i = 0; i < p.size(); ++i) {
        mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
        vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + eps);
      }
    }
  }
};

}  // namespace kgwalk
