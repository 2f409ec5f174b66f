#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "depcause/corpus.hpp"
#include "depcause/errors.hpp"
#include "json.hpp"

namespace depcause {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kStartId = 1;
inline constexpr std::size_t kEndId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kSpecialTagId = 0;

inline const std::array<const char*, 4> kReservedTokens = {"[PAD]", "[START]", "[END]", "[UNK]"};
inline constexpr const char* kSpecialTag = "[SPECIAL]";

// Universal POS inventory, always present after the special tag.
inline const std::array<const char*, 17> kUniversalPos = {
    "ADJ",  "ADP",   "ADV",   "AUX",   "CCONJ", "DET",  "INTJ", "NOUN", "NUM",
    "PART", "PRON",  "PROPN", "PUNCT", "SCONJ", "SYM",  "VERB", "X"};

inline std::string lowercase(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

/// Token and POS-tag id maps plus the positional capacity.
class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t token_count() const { return tokens_.size(); }
  std::size_t tag_count() const { return tags_.size(); }
  std::size_t max_len() const { return max_len_; }

  std::size_t token_id(const std::string& form) const {
    auto it = token_index_.find(lowercase(form));
    return it == token_index_.end() ? kUnkId : it->second;
  }

  bool has_tag(const std::string& tag) const { return tag_index_.count(tag) != 0; }

  std::size_t tag_id(const std::string& tag) const {
    auto it = tag_index_.find(tag);
    if (it == tag_index_.end()) throw ValidationError("unknown POS tag '" + tag + "'");
    return it->second;
  }

  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::string& tag(std::size_t id) const { return tags_.at(id); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tokens"] = nlohmann::json::object();
    j["tags"] = nlohmann::json::object();
    for (std::size_t i = 0; i < tokens_.size(); ++i) j["tokens"][tokens_[i]] = i;
    for (std::size_t i = 0; i < tags_.size(); ++i) j["tags"][tags_[i]] = i;
    j["max_len"] = max_len_;
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    auto load = [](const nlohmann::json& obj, const char* field) {
      if (!obj.is_object()) throw SchemaError(0, field, "expected an object");
      std::vector<std::string> list(obj.size());
      std::vector<bool> filled(obj.size(), false);
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!it.value().is_number_unsigned()) throw SchemaError(0, field, "ids must be integers");
        const auto id = it.value().get<std::size_t>();
        if (id >= list.size() || filled[id]) throw SchemaError(0, field, "ids are not dense");
        list[id] = it.key();
        filled[id] = true;
      }
      return list;
    };
    if (!j.contains("tokens")) throw SchemaError(0, "tokens", "missing");
    if (!j.contains("tags")) throw SchemaError(0, "tags", "missing");
    if (!j.contains("max_len") || !j["max_len"].is_number_unsigned()) {
      throw SchemaError(0, "max_len", "missing or not an integer");
    }
    v.tokens_ = load(j["tokens"], "tokens");
    v.tags_ = load(j["tags"], "tags");
    v.max_len_ = j["max_len"].get<std::size_t>();
    if (v.tokens_.size() < kReservedTokens.size() || v.tags_.empty()) {
      throw SchemaError(0, "tokens", "reserved entries missing");
    }
    v.reindex();
    return v;
  }

  bool operator==(const Vocabulary& o) const {
    return tokens_ == o.tokens_ && tags_ == o.tags_ && max_len_ == o.max_len_;
  }

 private:
  friend Vocabulary build_vocab(const std::vector<AnnotatedSentence>&, std::size_t, std::size_t);

  void reindex() {
    token_index_.clear();
    tag_index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) token_index_[tokens_[i]] = i;
    for (std::size_t i = 0; i < tags_.size(); ++i) tag_index_[tags_[i]] = i;
  }

  std::vector<std::string> tokens_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, std::size_t> token_index_;
  std::unordered_map<std::string, std::size_t> tag_index_;
  std::size_t max_len_ = 0;
};

/// Builds the vocabulary from training sentences. Surface forms are
/// lowercased; ids follow frequency (descending) then lexicographic order.
/// `max_len` of 0 means longest sentence + 2.
inline Vocabulary build_vocab(const std::vector<AnnotatedSentence>& corpus, std::size_t max_len = 0,
                              std::size_t min_count = 1) {
  if (corpus.empty()) throw PreconditionError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> token_freq, tag_freq;
  std::size_t longest = 0;
  for (const auto& s : corpus) {
    longest = std::max(longest, s.size());
    for (const auto& t : s.tokens) {
      ++token_freq[lowercase(t.form)];
      ++tag_freq[t.pos];
    }
  }
  auto ordered = [](const std::map<std::string, std::size_t>& freq, std::size_t min) {
    std::vector<std::pair<std::string, std::size_t>> items;
    for (const auto& [k, c] : freq) {
      if (c >= min) items.emplace_back(k, c);
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return items;
  };

  Vocabulary v;
  for (const char* r : kReservedTokens) v.tokens_.emplace_back(r);
  for (const auto& [form, c] : ordered(token_freq, min_count)) {
    if (std::find(v.tokens_.begin(), v.tokens_.end(), form) == v.tokens_.end()) {
      v.tokens_.push_back(form);
    }
  }
  v.tags_.emplace_back(kSpecialTag);
  for (const char* p : kUniversalPos) v.tags_.emplace_back(p);
  for (const auto& [tag, c] : ordered(tag_freq, 1)) {
    if (std::find(v.tags_.begin(), v.tags_.end(), tag) == v.tags_.end()) v.tags_.push_back(tag);
  }
  v.max_len_ = max_len == 0 ? longest + 2 : max_len;
  if (v.max_len_ < longest + 2) {
    throw PreconditionError("build_vocab: max_len " + std::to_string(v.max_len_) +
                            " is shorter than the longest sentence plus specials");
  }
  v.reindex();
  return v;
}

// ---------------------------------------------------------------------------
// Encoding

struct EncodedSentence {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> tags;
  std::vector<std::uint8_t> pad_mask;  // 1 on real and special positions, 0 on padding
};

/// Layout [START][tokens][END][PAD...] with positions 0..M−1. Sentences that
/// do not fit are rejected, never truncated.
inline EncodedSentence encode(const AnnotatedSentence& s, const Vocabulary& vocab,
                              std::size_t padded_len) {
  if (s.size() + 2 > padded_len) {
    throw ValidationError("sentence '" + s.id + "' has " + std::to_string(s.size()) +
                          " tokens; padded length " + std::to_string(padded_len) +
                          " fits at most " +
                          std::to_string(padded_len >= 2 ? padded_len - 2 : 0) +
                          " (no truncation)");
  }
  if (padded_len > vocab.max_len()) {
    throw ValidationError("padded length " + std::to_string(padded_len) +
                          " exceeds the vocabulary's position capacity " +
                          std::to_string(vocab.max_len()));
  }
  EncodedSentence e;
  e.ids.assign(padded_len, kPadId);
  e.tags.assign(padded_len, kSpecialTagId);
  e.pad_mask.assign(padded_len, 0);
  e.positions.resize(padded_len);
  for (std::size_t p = 0; p < padded_len; ++p) e.positions[p] = p;
  e.ids[0] = kStartId;
  e.pad_mask[0] = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    e.ids[i + 1] = vocab.token_id(s.tokens[i].form);
    e.tags[i + 1] = vocab.tag_id(s.tokens[i].pos);
    e.pad_mask[i + 1] = 1;
  }
  e.ids[s.size() + 1] = kEndId;
  e.pad_mask[s.size() + 1] = 1;
  return e;
}

/// B sentences stacked into (B·M)-row blocks, with per-row attention masks
/// for both towers and the gold labels.
struct EncodedBatch {
  std::size_t batch = 0;
  std::size_t padded_len = 0;
  std::vector<std::size_t> ids, positions, tags;
  std::vector<std::uint8_t> pad_mask;       // B·M
  std::vector<std::uint8_t> key_mask;       // B·M×M, left tower: non-pad keys
  std::vector<std::uint8_t> adjacency;      // B·M×M, right tower neighbors
  std::vector<TokenClass> labels;           // B·M
  std::vector<std::size_t> lengths;         // N per sentence

  std::size_t rows() const { return batch * padded_len; }
};

/// With `labelled` false the gold spans are ignored (prediction input) and
/// every real token is labelled Other.
inline EncodedBatch make_batch(std::span<const AnnotatedSentence* const> sentences,
                               const Vocabulary& vocab, std::size_t padded_len,
                               const AdjacencyOptions& adjacency = {}, bool labelled = true) {
  EncodedBatch b;
  b.batch = sentences.size();
  b.padded_len = padded_len;
  const std::size_t m = padded_len;
  b.key_mask.reserve(b.batch * m * m);
  b.adjacency.reserve(b.batch * m * m);
  for (const AnnotatedSentence* s : sentences) {
    auto e = encode(*s, vocab, m);
    LabelSequence labels;
    if (labelled) {
      labels = label_sequence(*s, m);
    } else {
      labels.assign(m, TokenClass::kSpecial);
      std::fill_n(labels.begin() + 1, s->size(), TokenClass::kOther);
    }
    auto adj = build_adjacency(*s, m, adjacency);
    b.ids.insert(b.ids.end(), e.ids.begin(), e.ids.end());
    b.positions.insert(b.positions.end(), e.positions.begin(), e.positions.end());
    b.tags.insert(b.tags.end(), e.tags.begin(), e.tags.end());
    b.pad_mask.insert(b.pad_mask.end(), e.pad_mask.begin(), e.pad_mask.end());
    for (std::size_t r = 0; r < m; ++r) b.key_mask.insert(b.key_mask.end(), e.pad_mask.begin(), e.pad_mask.end());
    b.adjacency.insert(b.adjacency.end(), adj.bits().begin(), adj.bits().end());
    b.labels.insert(b.labels.end(), labels.begin(), labels.end());
    b.lengths.push_back(s->size());
  }
  return b;
}

inline EncodedBatch make_batch(const std::vector<AnnotatedSentence>& sentences,
                               const Vocabulary& vocab, std::size_t padded_len,
                               const AdjacencyOptions& adjacency = {}) {
  std::vector<const AnnotatedSentence*> ptrs;
  for (const auto& s : sentences) ptrs.push_back(&s);
  return make_batch(ptrs, vocab, padded_len, adjacency);
}

}  // namespace depcause
