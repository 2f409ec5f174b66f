#pragma once

#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "depcause/corpus.hpp"
#include "depcause/ops.hpp"
#include "depcause/towers.hpp"

namespace depcause {

template <typename T>
struct GateParams {
  Tensor<T> w6;  // d×d
  Tensor<T> c;   // d

  static GateParams init(Rng& rng, std::size_t d) {
    return {detail::glorot<T>(rng, d, d), detail::filled<T>(d, 0.0)};
  }

  template <typename F>
  void visit(F&& fn) {
    fn("gate.w6", w6);
    fn("gate.c", c);
  }
};

template <typename T>
struct ClassifierParams {
  Tensor<T> hidden_w, hidden_b;  // only with a hidden layer
  Tensor<T> w, b;                // (d or hidden)×K, K

  static ClassifierParams init(Rng& rng, std::size_t d, bool hidden) {
    ClassifierParams p;
    if (hidden) {
      p.hidden_w = detail::glorot<T>(rng, d, d);
      p.hidden_b = detail::filled<T>(d, 0.0);
    }
    // Zero output layer: an untrained model predicts uniformly (loss ln K).
    p.w = Tensor<T>::zeros(Shape{d, kNumClasses}, true);
    p.b = detail::filled<T>(kNumClasses, 0.0);
    return p;
  }

  template <typename F>
  void visit(F&& fn) {
    if (hidden_w.defined()) {
      fn("cls.hidden_w", hidden_w);
      fn("cls.hidden_b", hidden_b);
    }
    fn("cls.w", w);
    fn("cls.b", b);
  }
};

/// e^s = σ(e^b W6 + c), computed from the left tower output only.
template <typename T>
Tensor<T> gate_values(const Tensor<T>& e_b, const GateParams<T>& params) {
  return sigmoid(add_bias(matmul(e_b, params.w6), params.c));
}

/// e = e^s ⊙ e^b + (1 − e^s) ⊙ e^t. A fixed `forced_gate` replaces e^s.
template <typename T>
Tensor<T> fuse(const Tensor<T>& e_b, const Tensor<T>& e_t, const GateParams<T>& params,
               std::optional<std::type_identity_t<T>> forced_gate = std::nullopt,
               Tensor<T>* gate_out = nullptr) {
  if (e_b.shape() != e_t.shape()) {
    throw DimensionError("fuse: tower outputs differ, " + shape_str(e_b.shape()) + " vs " +
                         shape_str(e_t.shape()));
  }
  Tensor<T> s = forced_gate ? Tensor<T>::full(e_b.shape(), *forced_gate)
                            : gate_values(e_b, params);
  if (gate_out) *gate_out = s;
  return gate_mix(s, e_b, e_t);
}

template <typename T>
Tensor<T> classify(const Tensor<T>& e, const ClassifierParams<T>& params,
                   GeluForm gelu_form = GeluForm::kExact) {
  Tensor<T> x = e;
  if (params.hidden_w.defined()) {
    x = gelu(add_bias(matmul(x, params.hidden_w), params.hidden_b), gelu_form);
  }
  return add_bias(matmul(x, params.w), params.b);
}

template <typename T>
Tensor<T> one_hot(std::span<const TokenClass> labels) {
  std::vector<T> values(labels.size() * kNumClasses, T(0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = static_cast<std::size_t>(labels[i]);
    if (id < 1 || id > kNumClasses) {
      throw ValidationError("invalid label id " + std::to_string(id) + " at position " +
                            std::to_string(i));
    }
    values[i * kNumClasses + id - 1] = T(1);
  }
  return Tensor<T>::from(Shape{labels.size(), kNumClasses}, std::move(values));
}

/// Mean cross-entropy over all positions. With `pad_mask` given (nonempty),
/// rows whose mask entry is 0 are left out.
template <typename T>
Tensor<T> model_loss(const Tensor<T>& logits, std::span<const TokenClass> labels,
                     MaskView pad_mask = {}) {
  if (logits.cols() != kNumClasses) {
    throw DimensionError("model_loss: expected " + std::to_string(kNumClasses) + " logit columns, got " +
                         shape_str(logits.shape()));
  }
  return cross_entropy(logits, one_hot<T>(labels), pad_mask);
}

}  // namespace depcause
