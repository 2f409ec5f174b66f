#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "depcause/errors.hpp"
#include "depcause/gradcheck.hpp"

namespace depcause {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates per parameter plus the step counter.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first;
  std::vector<std::vector<T>> second;
  std::size_t step = 0;

  explicit AdamState(const std::vector<NamedTensor<T>>& params) {
    for (const auto& [name, t] : params) {
      first.emplace_back(t.size(), T(0));
      second.emplace_back(t.size(), T(0));
    }
  }
};

/// One bias-corrected Adam update. Any non-finite gradient aborts before
/// anything is modified, naming the parameter.
template <typename T>
void adam_step(std::vector<NamedTensor<T>>& params, AdamState<T>& state, const AdamHyper& hp) {
  if (state.first.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [name, t] = params[p];
    if (state.first[p].size() != t.size()) {
      throw DimensionError("adam_step: moment shape differs for " + name);
    }
    if (!t.has_grad()) continue;
    for (T g : t.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient in parameter '" + name + "' at step " +
                           std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& t = params[p].second;
    if (!t.has_grad()) continue;
    auto values = t.mutable_values();
    const auto grad = t.grad();
    auto& m = state.first[p];
    auto& v = state.second[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[i]) / c1;
      const double v_hat = static_cast<double>(v[i]) / c2;
      values[i] -= static_cast<T>(hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.eps));
    }
  }
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_gradients(std::vector<NamedTensor<T>>& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (T g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (auto& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace depcause
