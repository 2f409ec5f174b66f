#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "depcause/corpus.hpp"
#include "depcause/errors.hpp"
#include "depcause/towers.hpp"
#include "json.hpp"

namespace depcause {

enum class Ablation { kNone, kLeftOnly, kRightOnly };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kLeftOnly: return "left-only";
    case Ablation::kRightOnly: return "right-only";
    default: return "none";
  }
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "none" || s.empty()) return Ablation::kNone;
  if (s == "left-only") return Ablation::kLeftOnly;
  if (s == "right-only") return Ablation::kRightOnly;
  throw ValidationError("unknown ablation '" + s + "' (none, left-only, right-only)");
}

/// Architecture settings. Vocabulary-dependent sizes are filled in from the
/// Vocabulary when a model is built.
struct ModelConfig {
  std::size_t dim = 64;
  std::size_t layers_left = 2;
  std::size_t layers_right = 2;
  std::size_t heads = 4;
  std::size_t right_heads = 1;
  std::size_t ffn_dim = 0;  // 0 means 4·dim
  bool standard_layernorm = false;
  bool attention_scaling = false;
  bool gelu_tanh = false;
  bool separate_embeddings = false;
  bool classifier_hidden = false;
  bool directed_edges = false;
  bool self_loops = true;
  double norm_eps = 1e-5;
  double layer_norm_eps = 1e-5;
  Ablation ablation = Ablation::kNone;

  std::size_t vocab_size = 0;
  std::size_t tag_count = 0;
  std::size_t max_len = 0;

  std::size_t ffn() const { return ffn_dim == 0 ? 4 * dim : ffn_dim; }

  TowerOptions tower_options() const {
    TowerOptions o;
    o.heads = heads;
    o.right_heads = right_heads;
    o.attention_scaling = attention_scaling;
    o.standard_layernorm = standard_layernorm;
    o.norm_eps = norm_eps;
    o.layer_norm_eps = layer_norm_eps;
    o.gelu = gelu_tanh ? GeluForm::kTanh : GeluForm::kExact;
    return o;
  }

  AdjacencyOptions adjacency_options() const {
    return AdjacencyOptions{self_loops, directed_edges};
  }

  void validate() const {
    if (dim == 0) throw ValidationError("dim must be positive");
    if (heads == 0 || dim % heads != 0) throw ValidationError("dim must be divisible by heads");
    if (right_heads == 0 || dim % right_heads != 0) {
      throw ValidationError("dim must be divisible by right_heads");
    }
    if (!(norm_eps > 0) || !(layer_norm_eps > 0)) throw ValidationError("epsilon must be positive");
    if (ablation == Ablation::kLeftOnly && layers_left == 0) {
      throw ValidationError("left-only ablation needs at least one left layer");
    }
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t tolerance = 10;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;       // 0 means unlimited
  double stop_train_loss = 0.0;    // stop once an epoch's train loss falls below; 0 disables
  bool pad_in_loss = true;
  double clip_norm = 0.0;          // global gradient norm clip; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string precision = "float64";
  bool record_timing = true;
  ModelConfig model;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
    if (tolerance == 0 || tolerance >= max_epochs) {
      throw ValidationError("tolerance must be positive and smaller than max_epochs");
    }
    if (precision != "float64" && precision != "float32") {
      throw ValidationError("precision must be float64 or float32");
    }
    if (clip_norm < 0) throw ValidationError("clip_norm must be non-negative");
    model.validate();
  }
};

// Paper-scale values kept alongside the desk-scale defaults.
inline constexpr std::size_t kPaperBatchSize = 128;
inline constexpr std::size_t kPaperMaxEpochs = 1000;

inline nlohmann::ordered_json to_json(const ModelConfig& m) {
  nlohmann::ordered_json j;
  j["dim"] = m.dim;
  j["layers_left"] = m.layers_left;
  j["layers_right"] = m.layers_right;
  j["heads"] = m.heads;
  j["right_heads"] = m.right_heads;
  j["ffn_dim"] = m.ffn();
  j["standard_layernorm"] = m.standard_layernorm;
  j["attention_scaling"] = m.attention_scaling;
  j["gelu_tanh"] = m.gelu_tanh;
  j["separate_embeddings"] = m.separate_embeddings;
  j["classifier_hidden"] = m.classifier_hidden;
  j["directed_edges"] = m.directed_edges;
  j["self_loops"] = m.self_loops;
  j["norm_eps"] = m.norm_eps;
  j["layer_norm_eps"] = m.layer_norm_eps;
  j["ablation"] = to_string(m.ablation);
  j["vocab_size"] = m.vocab_size;
  j["tag_count"] = m.tag_count;
  j["max_len"] = m.max_len;
  return j;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["tolerance"] = c.tolerance;
  j["seed"] = c.seed;
  j["max_steps"] = c.max_steps;
  j["stop_train_loss"] = c.stop_train_loss;
  j["pad_in_loss"] = c.pad_in_loss;
  j["clip_norm"] = c.clip_norm;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["precision"] = c.precision;
  j["record_timing"] = c.record_timing;
  const auto model = to_json(c.model);
  for (auto it = model.begin(); it != model.end(); ++it) j[it.key()] = it.value();
  j["paper_batch_size"] = kPaperBatchSize;
  j["paper_max_epochs"] = kPaperMaxEpochs;
  return j;
}

namespace detail {

template <typename V>
void read_field(const nlohmann::json& j, const char* key, V& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<V>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(0, key, "wrong type");
  }
}

}  // namespace detail

/// Reads a flat JSON object with TrainConfig and ModelConfig field names.
/// Unknown keys are rejected. Missing keys keep their current values.
inline void apply_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw SchemaError(0, "<config>", "expected a JSON object");
  static const std::set<std::string> known = {
      "learning_rate", "batch_size", "max_epochs", "tolerance", "seed", "max_steps",
      "stop_train_loss", "pad_in_loss", "clip_norm", "adam_beta1", "adam_beta2", "adam_eps",
      "precision", "record_timing", "dim", "layers_left", "layers_right", "heads", "right_heads",
      "ffn_dim", "standard_layernorm", "attention_scaling", "gelu_tanh", "separate_embeddings",
      "classifier_hidden", "directed_edges", "self_loops", "norm_eps", "layer_norm_eps",
      "ablation", "vocab_size", "tag_count", "max_len", "paper_batch_size", "paper_max_epochs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw SchemaError(0, it.key(), "unknown config key");
  }
  using detail::read_field;
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "max_epochs", c.max_epochs);
  read_field(j, "tolerance", c.tolerance);
  read_field(j, "seed", c.seed);
  read_field(j, "max_steps", c.max_steps);
  read_field(j, "stop_train_loss", c.stop_train_loss);
  read_field(j, "pad_in_loss", c.pad_in_loss);
  read_field(j, "clip_norm", c.clip_norm);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "adam_eps", c.adam_eps);
  read_field(j, "precision", c.precision);
  read_field(j, "record_timing", c.record_timing);
  auto& m = c.model;
  read_field(j, "dim", m.dim);
  read_field(j, "layers_left", m.layers_left);
  read_field(j, "layers_right", m.layers_right);
  read_field(j, "heads", m.heads);
  read_field(j, "right_heads", m.right_heads);
  read_field(j, "ffn_dim", m.ffn_dim);
  read_field(j, "standard_layernorm", m.standard_layernorm);
  read_field(j, "attention_scaling", m.attention_scaling);
  read_field(j, "gelu_tanh", m.gelu_tanh);
  read_field(j, "separate_embeddings", m.separate_embeddings);
  read_field(j, "classifier_hidden", m.classifier_hidden);
  read_field(j, "directed_edges", m.directed_edges);
  read_field(j, "self_loops", m.self_loops);
  read_field(j, "norm_eps", m.norm_eps);
  read_field(j, "layer_norm_eps", m.layer_norm_eps);
  read_field(j, "vocab_size", m.vocab_size);
  read_field(j, "tag_count", m.tag_count);
  read_field(j, "max_len", m.max_len);
  std::string ablation = to_string(m.ablation);
  read_field(j, "ablation", ablation);
  m.ablation = parse_ablation(ablation);
}

inline TrainConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, "config " + path.string() + ": " + e.what());
  }
  TrainConfig c;
  apply_json(j, c);
  return c;
}

}  // namespace depcause
