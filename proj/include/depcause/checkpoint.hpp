#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "depcause/config.hpp"
#include "depcause/io.hpp"
#include "depcause/model.hpp"
#include "depcause/vocab.hpp"
#include "json.hpp"

// Checkpoint directory layout:
//   manifest.json  config, tensor table (name, shape, byte offset, count)
//   weights.bin    concatenated little-endian float64 arrays
//   vocab.json     vocabulary

namespace depcause {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kCheckpointFormat = "depcause-checkpoint-v1";

namespace detail {

inline void append_f64_le(std::string& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, Model<T>& model, const Vocabulary& vocab,
                     TrainConfig config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint directory " + dir.string());
  config.model = model.config();

  std::string blob;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (auto& [name, t] : model.parameters()) {
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = blob.size();
    entry["count"] = t.size();
    tensors.push_back(entry);
    for (T v : t.values()) detail::append_f64_le(blob, static_cast<double>(v));
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["dtype"] = "float64-le";
  manifest["weights"] = "weights.bin";
  manifest["vocab"] = "vocab.json";
  manifest["config"] = to_json(config);
  manifest["tensors"] = tensors;

  write_file_atomic(dir / "weights.bin", blob);
  write_file_atomic(dir / "vocab.json", vocab.to_json().dump(1) + "\n");
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// The training config stored in a checkpoint, without loading weights.
inline TrainConfig read_checkpoint_config(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CheckpointError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("corrupt checkpoint json: ") + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format in " + dir.string());
  }
  TrainConfig config;
  apply_json(manifest.at("config"), config);
  return config;
}

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  Vocabulary vocab;
  TrainConfig config;
};

/// Loads and validates a checkpoint: every tensor the config implies must be
/// present with the expected shape, and nothing else.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& dir) {
  auto read_all = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  nlohmann::json manifest, vocab_json;
  try {
    manifest = nlohmann::json::parse(read_all(dir / "manifest.json"));
    vocab_json = nlohmann::json::parse(read_all(dir / "vocab.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("corrupt checkpoint json: ") + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw CheckpointError("unsupported checkpoint format in " + dir.string());
  }
  TrainConfig config;
  apply_json(manifest.at("config"), config);
  Vocabulary vocab = Vocabulary::from_json(vocab_json);
  if (config.model.vocab_size != vocab.token_count() || config.model.tag_count != vocab.tag_count() ||
      config.model.max_len != vocab.max_len()) {
    throw CheckpointError("checkpoint config does not match its vocabulary");
  }
  const std::string blob = read_all(dir / manifest.value("weights", "weights.bin"));
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());

  Model<T> model(config.model, 0);
  auto params = model.parameters();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    for (const auto& entry : tensors) {
      const auto name = entry.at("name").get<std::string>();
      bool found = false;
      for (auto& [pname, t] : params) found = found || pname == name;
      if (!found) throw CheckpointError("checkpoint tensor '" + name + "' is not part of the model");
    }
  }
  for (auto& [name, t] : params) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : tensors) {
      if (e.at("name").get<std::string>() == name) entry = &e;
    }
    if (!entry) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    const auto shape = entry->at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_str(shape) +
                            " in the checkpoint but the config implies " + shape_str(t.shape()));
    }
    const auto offset = entry->at("offset").get<std::size_t>();
    if (offset + t.size() * 8 > blob.size()) {
      throw CheckpointError("tensor '" + name + "' runs past the end of the weights file");
    }
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<T>(detail::read_f64_le(bytes + offset + 8 * i));
    }
  }
  return {std::move(model), std::move(vocab), std::move(config)};
}

}  // namespace depcause
