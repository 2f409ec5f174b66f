#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "depcause/config.hpp"
#include "depcause/gradcheck.hpp"
#include "depcause/head.hpp"
#include "depcause/towers.hpp"
#include "depcause/vocab.hpp"

namespace depcause {

template <typename T>
struct EmbeddingTables {
  Tensor<T> token;     // |vocab|×d
  Tensor<T> position;  // max_len×d
  Tensor<T> tag;       // |tags|×d

  static EmbeddingTables init(Rng& rng, std::size_t vocab, std::size_t max_len, std::size_t tags,
                              std::size_t d) {
    // Three tables are summed; 1/sqrt(3) keeps the sum near unit variance.
    const double stddev = 1.0 / std::sqrt(3.0);
    return {detail::random_matrix<T>(rng, vocab, d, stddev),
            detail::random_matrix<T>(rng, max_len, d, stddev),
            detail::random_matrix<T>(rng, tags, d, stddev)};
  }

  template <typename F>
  void visit(const std::string& prefix, F&& fn) {
    fn(prefix + "token", token);
    fn(prefix + "position", position);
    fn(prefix + "tag", tag);
  }
};

/// v_i = E_id[id_i] + E_pos[pos_i] + E_tag[tag_i].
template <typename T>
Tensor<T> embed(std::span<const std::size_t> ids, std::span<const std::size_t> positions,
                std::span<const std::size_t> tags, const EmbeddingTables<T>& tables) {
  if (ids.size() != positions.size() || ids.size() != tags.size()) {
    throw DimensionError("embed: id, position and tag sequences differ in length");
  }
  return add(add(embedding(tables.token, ids), embedding(tables.position, positions)),
             embedding(tables.tag, tags));
}

template <typename T>
struct ForwardOptions {
  std::optional<T> forced_gate;  // replaces e^s with a constant
  bool capture_attention = false;
};

template <typename T>
struct ForwardResult {
  Tensor<T> v, v_right;
  Tensor<T> e_b, e_t, gate, e;
  Tensor<T> logits;
  std::vector<std::vector<Tensor<T>>> left_attention;   // [layer][head]
  std::vector<std::vector<Tensor<T>>> right_attention;  // [layer][head]
};

/// Two-tower dependency-aware token classifier.
template <typename T>
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    if (config_.vocab_size == 0 || config_.tag_count == 0 || config_.max_len == 0) {
      throw ValidationError("model config lacks vocabulary sizes");
    }
    Rng rng(seed);
    const std::size_t d = config_.dim;
    embed_ = EmbeddingTables<T>::init(rng, config_.vocab_size, config_.max_len, config_.tag_count, d);
    if (config_.separate_embeddings && config_.ablation == Ablation::kNone) {
      embed_right_ =
          EmbeddingTables<T>::init(rng, config_.vocab_size, config_.max_len, config_.tag_count, d);
    }
    if (config_.ablation != Ablation::kRightOnly) {
      left_ = LeftTowerParams<T>::init(rng, d, config_.ffn(), config_.layers_left);
    }
    if (config_.ablation != Ablation::kLeftOnly) {
      right_ = RightTowerParams<T>::init(rng, d, config_.layers_right, config_.standard_layernorm);
    }
    if (config_.ablation == Ablation::kNone) gate_ = GateParams<T>::init(rng, d);
    classifier_ = ClassifierParams<T>::init(rng, d, config_.classifier_hidden);
  }

  const ModelConfig& config() const { return config_; }

  /// All trainable tensors in a fixed order with stable names.
  std::vector<NamedTensor<T>> parameters() {
    std::vector<NamedTensor<T>> out;
    auto push = [&out](const std::string& name, Tensor<T>& t) { out.emplace_back(name, t); };
    embed_.visit("embed.", push);
    if (embed_right_) embed_right_->visit("embed_right.", push);
    left_.visit(push);
    right_.visit(push);
    if (gate_) gate_->visit(push);
    classifier_.visit(push);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& [name, t] : parameters()) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : parameters()) t.zero_grad();
  }

  ForwardResult<T> forward(const EncodedBatch& batch, const ForwardOptions<T>& opt = {}) const {
    const auto tower = config_.tower_options();
    const std::size_t m = batch.padded_len;
    ForwardResult<T> r;
    r.v = embed(batch.ids, batch.positions, batch.tags, embed_);
    r.v_right = embed_right_ ? embed(batch.ids, batch.positions, batch.tags, *embed_right_) : r.v;
    if (config_.ablation != Ablation::kRightOnly) {
      r.e_b = left_encode(r.v, batch.key_mask, m, left_, tower,
                          opt.capture_attention ? &r.left_attention : nullptr);
    }
    if (config_.ablation != Ablation::kLeftOnly) {
      r.e_t = right_encode(r.v_right, batch.adjacency, m, right_, tower,
                           opt.capture_attention ? &r.right_attention : nullptr);
    }
    switch (config_.ablation) {
      case Ablation::kLeftOnly: r.e = r.e_b; break;
      case Ablation::kRightOnly: r.e = r.e_t; break;
      default: r.e = fuse(r.e_b, r.e_t, *gate_, opt.forced_gate, &r.gate); break;
    }
    r.logits = classify(r.e, classifier_, tower.gelu);
    return r;
  }

  Tensor<T> loss(const EncodedBatch& batch, bool pad_in_loss = true) const {
    auto logits = forward(batch).logits;
    return loss_from_logits(logits, batch, pad_in_loss);
  }

  static Tensor<T> loss_from_logits(const Tensor<T>& logits, const EncodedBatch& batch,
                                    bool pad_in_loss) {
    return model_loss(logits, batch.labels,
                      pad_in_loss ? MaskView{} : MaskView(batch.pad_mask));
  }

  EmbeddingTables<T>& embeddings() { return embed_; }
  LeftTowerParams<T>& left() { return left_; }
  RightTowerParams<T>& right() { return right_; }
  std::optional<GateParams<T>>& gate() { return gate_; }
  ClassifierParams<T>& classifier() { return classifier_; }

 private:
  ModelConfig config_;
  EmbeddingTables<T> embed_;
  std::optional<EmbeddingTables<T>> embed_right_;
  LeftTowerParams<T> left_;
  RightTowerParams<T> right_;
  std::optional<GateParams<T>> gate_;
  ClassifierParams<T> classifier_;
};

/// Copies parameter values by name from `src` into `dst`; returns how many
/// tensors were copied. Shapes must agree.
template <typename T>
std::size_t copy_parameters(Model<T>& src, Model<T>& dst) {
  auto from = src.parameters();
  std::size_t copied = 0;
  for (auto& [name, t] : dst.parameters()) {
    for (auto& [sname, s] : from) {
      if (sname != name) continue;
      if (s.shape() != t.shape()) throw DimensionError("copy_parameters: shape differs for " + name);
      std::copy(s.values().begin(), s.values().end(), t.mutable_values().begin());
      ++copied;
    }
  }
  return copied;
}

/// Model config sized for a vocabulary.
inline ModelConfig sized_for(ModelConfig config, const Vocabulary& vocab) {
  config.vocab_size = vocab.token_count();
  config.tag_count = vocab.tag_count();
  config.max_len = vocab.max_len();
  return config;
}

/// Finite-difference check of every model parameter against the loss on one
/// sentence. The vocabulary is built from the sentence itself.
template <typename T = double>
GradCheckReport model_gradcheck(ModelConfig config, const AnnotatedSentence& sentence,
                                 std::uint64_t seed, double tolerance, double step = 1e-5) {
  const Vocabulary vocab = build_vocab({sentence});
  config = sized_for(config, vocab);
  Model<T> model(config, seed);
  const auto batch = make_batch(std::vector<AnnotatedSentence>{sentence}, vocab, config.max_len,
                                config.adjacency_options());
  return finite_diff_check<T>([&] { return model.loss(batch); }, model.parameters(),
                              static_cast<T>(step), tolerance);
}

}  // namespace depcause
