#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "depcause/tensor.hpp"

// Differentiable operations over 2-D tensors. Each op documents its own
// backward rule inline; there is no general broadcasting.

namespace depcause {

using MaskView = std::span<const std::uint8_t>;

enum class GeluForm { kExact, kTanh };
enum class NormDenominator { kVariance, kStdDev };

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

template <typename T>
ConstMap<T> view(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return ConstMap<T>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename T>
MutMap<T> view(std::vector<T>& v, std::size_t rows, std::size_t cols) {
  return MutMap<T>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

template <typename T>
T gelu_exact(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_exact_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

template <typename T>
constexpr T kGeluTanhScale = T(0.7978845608028654);  // sqrt(2/pi)

template <typename T>
T gelu_tanh(T x) {
  const T u = kGeluTanhScale<T> * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_tanh_grad(T x) {
  const T u = kGeluTanhScale<T> * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  const T du = kGeluTanhScale<T> * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

/// c = a · b for a [m×k], b [k×n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  detail::view(out, m, n).noalias() =
      detail::view(a.node()->value, m, k) * detail::view(b.node()->value, k, n);
  return detail::make_op<T>("matmul", Shape{m, n}, std::move(out), {a, b},
                            [m, k, n](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              auto& B = *self.inputs[1];
                              auto dC = detail::view(self.grad, m, n);
                              if (A.requires_grad) {
                                detail::view(A.grad, m, k).noalias() +=
                                    dC * detail::view(B.value, k, n).transpose();
                              }
                              if (B.requires_grad) {
                                detail::view(B.grad, k, n).noalias() +=
                                    detail::view(A.value, m, k).transpose() * dC;
                              }
                            });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_op<T>("add", a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::make_op<T>("sub", a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (A.requires_grad) A.grad[i] += self.grad[i];
      if (B.requires_grad) B.grad[i] -= self.grad[i];
    }
  });
}

/// Elementwise (Hadamard) product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_op<T>("mul", a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (A.requires_grad) A.grad[i] += self.grad[i] * B.value[i];
      if (B.requires_grad) B.grad[i] += self.grad[i] * A.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return detail::make_op<T>("scale", a.shape(), std::move(out), {a},
                            [factor](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                A.grad[i] += self.grad[i] * factor;
                              }
                            });
}

/// Adds a bias vector (any shape holding `cols` values) to every row.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  detail::require_matrix(a, "add_bias");
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit rows of " +
                         shape_str(a.shape()));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias.values()[c];
  }
  return detail::make_op<T>("add_bias", a.shape(), std::move(out), {a, bias},
                            [m, n](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              auto& B = *self.inputs[1];
                              if (A.requires_grad) {
                                for (std::size_t i = 0; i < m * n; ++i) A.grad[i] += self.grad[i];
                              }
                              if (B.requires_grad) {
                                for (std::size_t r = 0; r < m; ++r) {
                                  for (std::size_t c = 0; c < n; ++c) {
                                    B.grad[c] += self.grad[r * n + c];
                                  }
                                }
                              }
                            });
}

/// Sum of all entries, as a one-element tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  return detail::make_op<T>("sum", Shape{1}, std::vector<T>{total}, {a},
                            [](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              const T g = self.grad[0];
                              for (auto& x : A.grad) x += g;
                            });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::stable_sigmoid(a.values()[i]);
  return detail::make_op<T>("sigmoid", a.shape(), std::move(out), {a},
                            [](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                const T s = self.value[i];
                                A.grad[i] += self.grad[i] * s * (T(1) - s);
                              }
                            });
}

/// x·Φ(x) with the exact normal CDF, or the tanh approximation on request.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a, GeluForm form = GeluForm::kExact) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.values()[i];
    out[i] = form == GeluForm::kExact ? detail::gelu_exact(x) : detail::gelu_tanh(x);
  }
  return detail::make_op<T>("gelu", a.shape(), std::move(out), {a},
                            [form](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                const T x = A.value[i];
                                const T d = form == GeluForm::kExact ? detail::gelu_exact_grad(x)
                                                                     : detail::gelu_tanh_grad(x);
                                A.grad[i] += self.grad[i] * d;
                              }
                            });
}

/// Row softmax restricted to positions where `mask` is nonzero.
///
/// Masked-out entries are exactly zero. Each row is shifted by its maximum
/// over valid positions before exponentiation. Every row must have at least
/// one valid entry.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, MaskView mask) {
  detail::require_matrix(scores, "masked_softmax");
  const std::size_t m = scores.rows(), n = scores.cols();
  if (mask.size() != m * n) {
    throw DimensionError("masked_softmax: mask holds " + std::to_string(mask.size()) +
                         " entries for scores " + shape_str(scores.shape()));
  }
  std::vector<T> out(m * n, T(0));
  const auto s = scores.values();
  for (std::size_t r = 0; r < m; ++r) {
    T row_max = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c]) {
        any = true;
        row_max = std::max(row_max, s[r * n + c]);
      }
    }
    if (!any) {
      throw PreconditionError("masked_softmax: row " + std::to_string(r) +
                              " has no valid position");
    }
    T denom = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      if (mask[r * n + c]) {
        out[r * n + c] = std::exp(s[r * n + c] - row_max);
        denom += out[r * n + c];
      }
    }
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= denom;
  }
  return detail::make_op<T>("masked_softmax", scores.shape(), std::move(out), {scores},
                            [m, n](detail::Node<T>& self) {
                              // dS_ij = P_ij (dP_ij - sum_k P_ik dP_ik); zero P gives zero grad.
                              auto& S = *self.inputs[0];
                              for (std::size_t r = 0; r < m; ++r) {
                                T dot = T(0);
                                for (std::size_t c = 0; c < n; ++c) {
                                  dot += self.value[r * n + c] * self.grad[r * n + c];
                                }
                                for (std::size_t c = 0; c < n; ++c) {
                                  const T p = self.value[r * n + c];
                                  S.grad[r * n + c] += p * (self.grad[r * n + c] - dot);
                                }
                              }
                            });
}

/// Per-block q·kᵀ. Rows of `q` and `k` are grouped into consecutive blocks of
/// `block` rows; the result row i holds scores of query i against the keys of
/// its own block, so the output is [rows×block].
template <typename T>
Tensor<T> block_scores(const Tensor<T>& q, const Tensor<T>& k, std::size_t block) {
  detail::require_matrix(q, "block_scores");
  detail::require_same_shape(q, k, "block_scores");
  const std::size_t rows = q.rows(), width = q.cols();
  if (block == 0 || rows % block != 0) {
    throw DimensionError("block_scores: " + std::to_string(rows) +
                         " rows are not a multiple of block " + std::to_string(block));
  }
  const std::size_t blocks = rows / block;
  const auto eb = static_cast<Eigen::Index>(block);
  std::vector<T> out(rows * block, T(0));
  auto Q = detail::view(q.node()->value, rows, width);
  auto K = detail::view(k.node()->value, rows, width);
  auto S = detail::view(out, rows, block);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto off = static_cast<Eigen::Index>(b * block);
    S.middleRows(off, eb).noalias() = Q.middleRows(off, eb) * K.middleRows(off, eb).transpose();
  }
  return detail::make_op<T>(
      "block_scores", Shape{rows, block}, std::move(out), {q, k},
      [rows, width, block, blocks](detail::Node<T>& self) {
        auto& Qn = *self.inputs[0];
        auto& Kn = *self.inputs[1];
        const auto eb = static_cast<Eigen::Index>(block);
        auto dS = detail::view(self.grad, rows, block);
        auto Qv = detail::view(Qn.value, rows, width);
        auto Kv = detail::view(Kn.value, rows, width);
        for (std::size_t b = 0; b < blocks; ++b) {
          const auto off = static_cast<Eigen::Index>(b * block);
          if (Qn.requires_grad) {
            detail::view(Qn.grad, rows, width).middleRows(off, eb).noalias() +=
                dS.middleRows(off, eb) * Kv.middleRows(off, eb);
          }
          if (Kn.requires_grad) {
            detail::view(Kn.grad, rows, width).middleRows(off, eb).noalias() +=
                dS.middleRows(off, eb).transpose() * Qv.middleRows(off, eb);
          }
        }
      });
}

/// Per-block p·v: `p` is [rows×block] (as produced by block_scores), `v` is
/// [rows×width]; each block of p mixes the value rows of its own block.
template <typename T>
Tensor<T> block_mix(const Tensor<T>& p, const Tensor<T>& v, std::size_t block) {
  detail::require_matrix(p, "block_mix");
  detail::require_matrix(v, "block_mix");
  const std::size_t rows = v.rows(), width = v.cols();
  if (p.rows() != rows || p.cols() != block || block == 0 || rows % block != 0) {
    throw DimensionError("block_mix: weights " + shape_str(p.shape()) + " incompatible with values " +
                         shape_str(v.shape()) + " at block " + std::to_string(block));
  }
  const std::size_t blocks = rows / block;
  const auto eb = static_cast<Eigen::Index>(block);
  std::vector<T> out(rows * width, T(0));
  auto P = detail::view(p.node()->value, rows, block);
  auto V = detail::view(v.node()->value, rows, width);
  auto O = detail::view(out, rows, width);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto off = static_cast<Eigen::Index>(b * block);
    O.middleRows(off, eb).noalias() = P.middleRows(off, eb) * V.middleRows(off, eb);
  }
  return detail::make_op<T>(
      "block_mix", Shape{rows, width}, std::move(out), {p, v},
      [rows, width, block, blocks](detail::Node<T>& self) {
        auto& Pn = *self.inputs[0];
        auto& Vn = *self.inputs[1];
        const auto eb = static_cast<Eigen::Index>(block);
        auto dO = detail::view(self.grad, rows, width);
        auto Pv = detail::view(Pn.value, rows, block);
        auto Vv = detail::view(Vn.value, rows, width);
        for (std::size_t b = 0; b < blocks; ++b) {
          const auto off = static_cast<Eigen::Index>(b * block);
          if (Pn.requires_grad) {
            detail::view(Pn.grad, rows, block).middleRows(off, eb).noalias() +=
                dO.middleRows(off, eb) * Vv.middleRows(off, eb).transpose();
          }
          if (Vn.requires_grad) {
            detail::view(Vn.grad, rows, width).middleRows(off, eb).noalias() +=
                Pv.middleRows(off, eb).transpose() * dO.middleRows(off, eb);
          }
        }
      });
}

/// Gathers rows of `table` [V×d] by index.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> ids) {
  detail::require_matrix(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw DimensionError("embedding: id " + std::to_string(ids[i]) + " out of range for table " +
                           shape_str(table.shape()));
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return detail::make_op<T>("embedding", Shape{ids.size(), d}, std::move(out), {table},
                            [idx = std::move(idx), d](detail::Node<T>& self) {
                              auto& Tn = *self.inputs[0];
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                for (std::size_t c = 0; c < d; ++c) {
                                  Tn.grad[idx[i] * d + c] += self.grad[i * d + c];
                                }
                              }
                            });
}

/// Conventional layer normalization with per-feature gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  detail::require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias must hold " + std::to_string(n) + " values");
  }
  std::vector<T> out(m * n), xhat(m * n), inv_std(m);
  const auto xv = x.values();
  for (std::size_t r = 0; r < m; ++r) {
    T mean = T(0);
    for (std::size_t c = 0; c < n; ++c) mean += xv[r * n + c];
    mean /= T(n);
    T var = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      const T dv = xv[r * n + c] - mean;
      var += dv * dv;
    }
    var /= T(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (xv[r * n + c] - mean) * inv_std[r];
      out[r * n + c] = xhat[r * n + c] * gain.values()[c] + bias.values()[c];
    }
  }
  return detail::make_op<T>(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& G = *self.inputs[1];
        auto& B = *self.inputs[2];
        std::vector<T> dxhat(n);
        for (std::size_t r = 0; r < m; ++r) {
          T mean_d = T(0), mean_dx = T(0);
          for (std::size_t c = 0; c < n; ++c) {
            const T g = self.grad[r * n + c];
            if (G.requires_grad) G.grad[c] += g * xhat[r * n + c];
            if (B.requires_grad) B.grad[c] += g;
            dxhat[c] = g * G.value[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat[r * n + c];
          }
          if (!X.requires_grad) continue;
          mean_d /= T(n);
          mean_dx /= T(n);
          for (std::size_t c = 0; c < n; ++c) {
            X.grad[r * n + c] += inv_std[r] * (dxhat[c] - mean_d - xhat[r * n + c] * mean_dx);
          }
        }
      });
}

/// Residual add-and-norm: out_i = v_i + γ·(o_i − μ_i)/D_i + β, with μ_i and
/// σ²_i the mean and (population) variance of row o_i and D_i = σ²_i + ε
/// (kVariance) or √(σ²_i + ε) (kStdDev). γ and β hold either one value
/// (shared scalar) or one value per feature.
template <typename T>
Tensor<T> residual_norm(const Tensor<T>& v, const Tensor<T>& o, const Tensor<T>& gamma,
                        const Tensor<T>& beta, T eps, NormDenominator denom) {
  detail::require_matrix(o, "residual_norm");
  detail::require_same_shape(v, o, "residual_norm");
  const std::size_t m = o.rows(), n = o.cols();
  const bool scalar_gamma = gamma.size() == 1;
  const bool scalar_beta = beta.size() == 1;
  if ((!scalar_gamma && gamma.size() != n) || (!scalar_beta && beta.size() != n)) {
    throw DimensionError("residual_norm: gamma/beta must hold 1 or " + std::to_string(n) +
                         " values");
  }
  std::vector<T> out(m * n), centered(m * n), var(m);
  const auto ov = o.values();
  const auto vv = v.values();
  auto at = [](const Tensor<T>& t, bool scalar, std::size_t c) {
    return t.values()[scalar ? 0 : c];
  };
  for (std::size_t r = 0; r < m; ++r) {
    T mean = T(0);
    for (std::size_t c = 0; c < n; ++c) mean += ov[r * n + c];
    mean /= T(n);
    T s2 = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      centered[r * n + c] = ov[r * n + c] - mean;
      s2 += centered[r * n + c] * centered[r * n + c];
    }
    var[r] = s2 / T(n);
    const T d = denom == NormDenominator::kVariance ? var[r] + eps : std::sqrt(var[r] + eps);
    for (std::size_t c = 0; c < n; ++c) {
      out[r * n + c] =
          vv[r * n + c] + at(gamma, scalar_gamma, c) * (centered[r * n + c] / d) + at(beta, scalar_beta, c);
    }
  }
  return detail::make_op<T>(
      "residual_norm", o.shape(), std::move(out), {v, o, gamma, beta},
      [m, n, eps, denom, scalar_gamma, scalar_beta, centered = std::move(centered),
       var = std::move(var)](detail::Node<T>& self) {
        auto& V = *self.inputs[0];
        auto& O = *self.inputs[1];
        auto& G = *self.inputs[2];
        auto& B = *self.inputs[3];
        std::vector<T> dy(n);
        for (std::size_t r = 0; r < m; ++r) {
          const T s = var[r] + eps;
          const T d = denom == NormDenominator::kVariance ? s : std::sqrt(s);
          // dD/dσ² for the two denominators.
          const T dd_dvar = denom == NormDenominator::kVariance ? T(1) : T(0.5) / d;
          T sum_dy = T(0), sum_dy_c = T(0);
          for (std::size_t c = 0; c < n; ++c) {
            const T g = self.grad[r * n + c];
            if (V.requires_grad) V.grad[r * n + c] += g;
            const T gam = G.value[scalar_gamma ? 0 : c];
            if (G.requires_grad) G.grad[scalar_gamma ? 0 : c] += g * centered[r * n + c] / d;
            if (B.requires_grad) B.grad[scalar_beta ? 0 : c] += g;
            dy[c] = g * gam;  // gradient w.r.t. y = centered / d
            sum_dy += dy[c];
            sum_dy_c += dy[c] * centered[r * n + c];
          }
          if (!O.requires_grad) continue;
          // y_c = x̃_c / D(σ²); ∂σ²/∂o_c = 2 x̃_c / n; centering removes the mean.
          const T dvar = -sum_dy_c / (d * d) * dd_dvar;
          for (std::size_t c = 0; c < n; ++c) {
            O.grad[r * n + c] +=
                (dy[c] - sum_dy / T(n)) / d + dvar * T(2) * centered[r * n + c] / T(n);
          }
        }
      });
}

/// Gated convex combination: out = s⊙a + (1−s)⊙b.
template <typename T>
Tensor<T> gate_mix(const Tensor<T>& s, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(s, a, "gate_mix");
  detail::require_same_shape(a, b, "gate_mix");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T g = s.values()[i];
    out[i] = g * a.values()[i] + (T(1) - g) * b.values()[i];
  }
  return detail::make_op<T>("gate_mix", a.shape(), std::move(out), {s, a, b},
                            [](detail::Node<T>& self) {
                              auto& S = *self.inputs[0];
                              auto& A = *self.inputs[1];
                              auto& B = *self.inputs[2];
                              for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                const T g = self.grad[i];
                                if (S.requires_grad) S.grad[i] += g * (A.value[i] - B.value[i]);
                                if (A.requires_grad) A.grad[i] += g * S.value[i];
                                if (B.requires_grad) B.grad[i] += g * (T(1) - S.value[i]);
                              }
                            });
}

/// Columns [begin, begin+count) of a matrix.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t count) {
  detail::require_matrix(a, "slice_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (begin + count > n) {
    throw DimensionError("slice_cols: range exceeds " + shape_str(a.shape()));
  }
  std::vector<T> out(m * count);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = a.values()[r * n + begin + c];
  }
  return detail::make_op<T>("slice_cols", Shape{m, count}, std::move(out), {a},
                            [m, n, begin, count](detail::Node<T>& self) {
                              auto& A = *self.inputs[0];
                              for (std::size_t r = 0; r < m; ++r) {
                                for (std::size_t c = 0; c < count; ++c) {
                                  A.grad[r * n + begin + c] += self.grad[r * count + c];
                                }
                              }
                            });
}

/// Horizontal concatenation of matrices with equal row counts.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_cols");
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<T> out(m * total);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < widths[i]; ++c) {
        out[r * total + offset + c] = parts[i].values()[r * widths[i] + c];
      }
    }
    offset += widths[i];
  }
  return detail::make_op<T>("concat_cols", Shape{m, total}, std::move(out), parts,
                            [m, total, widths](detail::Node<T>& self) {
                              std::size_t off = 0;
                              for (std::size_t i = 0; i < widths.size(); ++i) {
                                auto& P = *self.inputs[i];
                                if (P.requires_grad) {
                                  for (std::size_t r = 0; r < m; ++r) {
                                    for (std::size_t c = 0; c < widths[i]; ++c) {
                                      P.grad[r * widths[i] + c] += self.grad[r * total + off + c];
                                    }
                                  }
                                }
                                off += widths[i];
                              }
                            });
}

/// Mean negative log-likelihood of one-hot targets under row-softmax(logits).
///
/// `row_weights`, when given, holds one 0/1 entry per row; rows with weight 0
/// are excluded from both the sum and the mean. Log-probabilities go through
/// log-sum-exp.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& onehot,
                        MaskView row_weights = {}) {
  detail::require_matrix(logits, "cross_entropy");
  detail::require_same_shape(logits, onehot, "cross_entropy");
  const std::size_t m = logits.rows(), k = logits.cols();
  if (!row_weights.empty() && row_weights.size() != m) {
    throw DimensionError("cross_entropy: row mask holds " + std::to_string(row_weights.size()) +
                         " entries for " + std::to_string(m) + " rows");
  }
  std::vector<std::size_t> target(m);
  const auto oh = onehot.values();
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t ones = 0, zeros = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (oh[r * k + c] == T(1)) {
        ++ones;
        target[r] = c;
      } else if (oh[r * k + c] == T(0)) {
        ++zeros;
      }
    }
    if (ones != 1 || zeros != k - 1) {
      throw ValidationError("cross_entropy: target row " + std::to_string(r) + " is not one-hot");
    }
  }
  std::vector<T> probs(m * k);
  const auto lv = logits.values();
  T total = T(0);
  std::size_t counted = 0;
  for (std::size_t r = 0; r < m; ++r) {
    T mx = lv[r * k];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv[r * k + c]);
    T z = T(0);
    for (std::size_t c = 0; c < k; ++c) z += std::exp(lv[r * k + c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < k; ++c) probs[r * k + c] = std::exp(lv[r * k + c] - lse);
    if (row_weights.empty() || row_weights[r]) {
      total += lse - lv[r * k + target[r]];
      ++counted;
    }
  }
  if (counted == 0) throw PreconditionError("cross_entropy: every row is masked out");
  std::vector<std::uint8_t> weights(row_weights.begin(), row_weights.end());
  return detail::make_op<T>(
      "cross_entropy", Shape{1}, std::vector<T>{total / T(counted)}, {logits},
      [m, k, counted, probs = std::move(probs), target = std::move(target),
       weights = std::move(weights)](detail::Node<T>& self) {
        auto& L = *self.inputs[0];
        const T g = self.grad[0] / T(counted);
        for (std::size_t r = 0; r < m; ++r) {
          if (!weights.empty() && !weights[r]) continue;
          for (std::size_t c = 0; c < k; ++c) {
            const T y = c == target[r] ? T(1) : T(0);
            L.grad[r * k + c] += g * (probs[r * k + c] - y);
          }
        }
      });
}

}  // namespace depcause
