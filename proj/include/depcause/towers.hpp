#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "depcause/gradcheck.hpp"
#include "depcause/ops.hpp"
#include "depcause/rng.hpp"

namespace depcause {

struct TowerOptions {
  std::size_t heads = 4;            // left tower
  std::size_t right_heads = 1;
  bool attention_scaling = false;   // 1/sqrt(head width) in the right tower
  bool standard_layernorm = false;  // sqrt denominator + per-feature gamma/beta in the right tower
  double norm_eps = 1e-5;           // right tower add-&-norm epsilon
  double layer_norm_eps = 1e-5;     // left tower layer norm epsilon
  GeluForm gelu = GeluForm::kExact;
};

namespace detail {

template <typename T>
Tensor<T> random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::vector<T> values(rows * cols);
  for (auto& x : values) x = static_cast<T>(rng.normal() * stddev);
  return Tensor<T>::from(Shape{rows, cols}, std::move(values), true);
}

template <typename T>
Tensor<T> filled(std::size_t n, double value) {
  return Tensor<T>::full(Shape{n}, static_cast<T>(value), true);
}

template <typename T>
Tensor<T> glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  return random_matrix<T>(rng, fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

// Scaled dot-product attention split over `heads` column groups. Rows are
// grouped into blocks of `block`; `mask` is [rows×block].
template <typename T>
Tensor<T> split_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               MaskView mask, std::size_t block, std::size_t heads, bool scaled,
                               std::vector<Tensor<T>>* probs_out = nullptr) {
  const std::size_t width = q.cols();
  if (heads == 0 || width % heads != 0) {
    throw DimensionError("attention width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t hw = width / heads;
  const T factor = scaled ? T(1) / std::sqrt(static_cast<T>(hw)) : T(1);
  std::vector<Tensor<T>> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = heads == 1 ? q : slice_cols(q, h * hw, hw);
    auto kh = heads == 1 ? k : slice_cols(k, h * hw, hw);
    auto vh = heads == 1 ? v : slice_cols(v, h * hw, hw);
    auto scores = block_scores(qh, kh, block);
    if (scaled) scores = scale(scores, factor);
    auto probs = masked_softmax(scores, mask);
    if (probs_out) probs_out->push_back(probs);
    outputs.push_back(block_mix(probs, vh, block));
  }
  return heads == 1 ? outputs.front() : concat_cols(outputs);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Left tower: conventional post-norm transformer encoder.

template <typename T>
struct LeftLayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor<T> ln2_gain, ln2_bias;

  static LeftLayerParams init(Rng& rng, std::size_t d, std::size_t ffn) {
    LeftLayerParams p;
    p.wq = detail::glorot<T>(rng, d, d);
    p.bq = detail::filled<T>(d, 0.0);
    p.wk = detail::glorot<T>(rng, d, d);
    p.bk = detail::filled<T>(d, 0.0);
    p.wv = detail::glorot<T>(rng, d, d);
    p.bv = detail::filled<T>(d, 0.0);
    p.wo = detail::glorot<T>(rng, d, d);
    p.bo = detail::filled<T>(d, 0.0);
    p.ln1_gain = detail::filled<T>(d, 1.0);
    p.ln1_bias = detail::filled<T>(d, 0.0);
    p.ffn_w1 = detail::glorot<T>(rng, d, ffn);
    p.ffn_b1 = detail::filled<T>(ffn, 0.0);
    p.ffn_w2 = detail::glorot<T>(rng, ffn, d);
    p.ffn_b2 = detail::filled<T>(d, 0.0);
    p.ln2_gain = detail::filled<T>(d, 1.0);
    p.ln2_bias = detail::filled<T>(d, 0.0);
    return p;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& fn) {
    fn(prefix + "wq", wq);
    fn(prefix + "bq", bq);
    fn(prefix + "wk", wk);
    fn(prefix + "bk", bk);
    fn(prefix + "wv", wv);
    fn(prefix + "bv", bv);
    fn(prefix + "wo", wo);
    fn(prefix + "bo", bo);
    fn(prefix + "ln1_gain", ln1_gain);
    fn(prefix + "ln1_bias", ln1_bias);
    fn(prefix + "ffn_w1", ffn_w1);
    fn(prefix + "ffn_b1", ffn_b1);
    fn(prefix + "ffn_w2", ffn_w2);
    fn(prefix + "ffn_b2", ffn_b2);
    fn(prefix + "ln2_gain", ln2_gain);
    fn(prefix + "ln2_bias", ln2_bias);
  }
};

template <typename T>
struct LeftTowerParams {
  std::vector<LeftLayerParams<T>> layers;

  static LeftTowerParams init(Rng& rng, std::size_t d, std::size_t ffn, std::size_t count) {
    LeftTowerParams p;
    for (std::size_t i = 0; i < count; ++i) p.layers.push_back(LeftLayerParams<T>::init(rng, d, ffn));
    return p;
  }

  template <typename F>
  void visit(F&& fn) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit("left." + std::to_string(i) + ".", fn);
  }
};

/// Standard encoder stack over `v` [B·M×d]. `key_mask` [B·M×M] marks the
/// keys each query may attend to (non-pad positions of its own sentence).
template <typename T>
Tensor<T> left_encode(const Tensor<T>& v, MaskView key_mask, std::size_t block,
                      const LeftTowerParams<T>& params, const TowerOptions& opt,
                      std::vector<std::vector<Tensor<T>>>* attention = nullptr) {
  Tensor<T> x = v;
  const T eps = static_cast<T>(opt.layer_norm_eps);
  for (const auto& layer : params.layers) {
    auto q = add_bias(matmul(x, layer.wq), layer.bq);
    auto k = add_bias(matmul(x, layer.wk), layer.bk);
    auto val = add_bias(matmul(x, layer.wv), layer.bv);
    std::vector<Tensor<T>> probs;
    auto ctx = detail::split_head_attention(q, k, val, key_mask, block, opt.heads, true,
                                            attention ? &probs : nullptr);
    if (attention) attention->push_back(std::move(probs));
    auto attn = add_bias(matmul(ctx, layer.wo), layer.bo);
    auto h = layer_norm(add(x, attn), layer.ln1_gain, layer.ln1_bias, eps);
    auto ff = add_bias(matmul(gelu(add_bias(matmul(h, layer.ffn_w1), layer.ffn_b1), opt.gelu),
                              layer.ffn_w2),
                       layer.ffn_b2);
    x = layer_norm(add(h, ff), layer.ln2_gain, layer.ln2_bias, eps);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Right tower: dependency-masked attention with the scalar add-&-norm.

template <typename T>
struct RightLayerParams {
  Tensor<T> w1, w2, w3, w4;  // query, key, value, output
  Tensor<T> gamma1, beta1;
  Tensor<T> w5, b;
  Tensor<T> gamma2, beta2;

  static RightLayerParams init(Rng& rng, std::size_t d, bool per_feature_norm) {
    const std::size_t norm_width = per_feature_norm ? d : 1;
    RightLayerParams p;
    p.w1 = detail::glorot<T>(rng, d, d);
    p.w2 = detail::glorot<T>(rng, d, d);
    p.w3 = detail::glorot<T>(rng, d, d);
    p.w4 = detail::glorot<T>(rng, d, d);
    p.gamma1 = detail::filled<T>(norm_width, 1.0);
    p.beta1 = detail::filled<T>(norm_width, 0.0);
    p.w5 = detail::glorot<T>(rng, d, d);
    p.b = detail::filled<T>(d, 0.0);
    p.gamma2 = detail::filled<T>(norm_width, 1.0);
    p.beta2 = detail::filled<T>(norm_width, 0.0);
    return p;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& fn) {
    fn(prefix + "w1", w1);
    fn(prefix + "w2", w2);
    fn(prefix + "w3", w3);
    fn(prefix + "w4", w4);
    fn(prefix + "gamma1", gamma1);
    fn(prefix + "beta1", beta1);
    fn(prefix + "w5", w5);
    fn(prefix + "b", b);
    fn(prefix + "gamma2", gamma2);
    fn(prefix + "beta2", beta2);
  }
};

template <typename T>
struct RightTowerParams {
  std::vector<RightLayerParams<T>> layers;

  static RightTowerParams init(Rng& rng, std::size_t d, std::size_t count, bool per_feature_norm) {
    RightTowerParams p;
    for (std::size_t i = 0; i < count; ++i) {
      p.layers.push_back(RightLayerParams<T>::init(rng, d, per_feature_norm));
    }
    return p;
  }

  template <typename F>
  void visit(F&& fn) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit("right." + std::to_string(i) + ".", fn);
  }
};

/// o_i = Σ_k α_ik (v_k W3) W4 over dependency neighbors k of i, with
/// α = masked_softmax((v W1)(v W2)ᵀ, adjacency). Unscaled unless
/// `attention_scaling` is set. `alpha_out` receives one α per head.
template <typename T>
Tensor<T> dep_attention(const Tensor<T>& v, MaskView adjacency, std::size_t block,
                        const RightLayerParams<T>& layer, const TowerOptions& opt,
                        std::vector<Tensor<T>>* alpha_out = nullptr) {
  auto q = matmul(v, layer.w1);
  auto k = matmul(v, layer.w2);
  auto val = matmul(v, layer.w3);
  auto mixed = detail::split_head_attention(q, k, val, adjacency, block, opt.right_heads,
                                            opt.attention_scaling, alpha_out);
  return matmul(mixed, layer.w4);
}

/// ō = v + γ(o − μ)/(σ² + ε) + β per row; the conventional √(σ²+ε) form when
/// `standard_layernorm` is set.
template <typename T>
Tensor<T> paper_add_norm(const Tensor<T>& v, const Tensor<T>& o, const Tensor<T>& gamma,
                         const Tensor<T>& beta, const TowerOptions& opt) {
  return residual_norm(v, o, gamma, beta, static_cast<T>(opt.norm_eps),
                       opt.standard_layernorm ? NormDenominator::kStdDev
                                              : NormDenominator::kVariance);
}

/// Per layer: ō = add_norm(v, dep_attention(v)); out = add_norm(ō, GELU(ō W5 + b)).
template <typename T>
Tensor<T> right_encode(const Tensor<T>& v, MaskView adjacency, std::size_t block,
                       const RightTowerParams<T>& params, const TowerOptions& opt,
                       std::vector<std::vector<Tensor<T>>>* alphas = nullptr) {
  Tensor<T> x = v;
  for (const auto& layer : params.layers) {
    std::vector<Tensor<T>> alpha;
    auto o = dep_attention(x, adjacency, block, layer, opt, alphas ? &alpha : nullptr);
    if (alphas) alphas->push_back(std::move(alpha));
    auto o_bar = paper_add_norm(x, o, layer.gamma1, layer.beta1, opt);
    auto ff = gelu(add_bias(matmul(o_bar, layer.w5), layer.b), opt.gelu);
    x = paper_add_norm(o_bar, ff, layer.gamma2, layer.beta2, opt);
  }
  return x;
}

}  // namespace depcause
