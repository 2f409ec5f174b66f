#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "depcause/errors.hpp"
#include "depcause/rng.hpp"

namespace depcause {

inline constexpr int kRootHead = -1;

struct AnnotatedToken {
  std::string form;
  std::string pos;  // Universal POS tag
  int head = kRootHead;
  std::string deprel;

  bool operator==(const AnnotatedToken&) const = default;
};

// Contiguous, inclusive token range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin + 1; }
  bool contains(std::size_t i) const { return i >= begin && i <= end; }
  bool overlaps(const Span& other) const { return begin <= other.end && other.begin <= end; }
  bool operator==(const Span&) const = default;
};

struct AnnotatedSentence {
  std::string id;
  std::vector<AnnotatedToken> tokens;
  Span cause;
  Span effect;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const AnnotatedSentence&) const = default;
};

// Token classes. Values are the class ids used throughout; logit column is id − 1.
enum class TokenClass : std::uint8_t { kSpecial = 1, kCause = 2, kEffect = 3, kOther = 4 };
inline constexpr std::size_t kNumClasses = 4;

inline std::size_t class_column(TokenClass c) { return static_cast<std::size_t>(c) - 1; }

using LabelSequence = std::vector<TokenClass>;

// ---------------------------------------------------------------------------
// Validation

inline std::optional<std::string> tree_problem(const AnnotatedSentence& s) {
  const std::size_t n = s.size();
  if (n == 0) return "sentence has no tokens";
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int h = s.tokens[i].head;
    if (h == kRootHead) {
      ++roots;
    } else if (h < 0 || static_cast<std::size_t>(h) >= n) {
      return "token " + std::to_string(i) + " has out-of-range head " + std::to_string(h);
    } else if (static_cast<std::size_t>(h) == i) {
      return "token " + std::to_string(i) + " is its own head";
    }
  }
  if (roots != 1) return "expected exactly one root, found " + std::to_string(roots);
  // 0 = unvisited, 1 = on current path, 2 = reaches root.
  std::vector<std::uint8_t> state(n, 0);
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::size_t> path;
    std::size_t cur = start;
    while (true) {
      if (state[cur] == 2) break;
      if (state[cur] == 1) {
        std::string cycle;
        auto it = std::find(path.begin(), path.end(), cur);
        for (; it != path.end(); ++it) cycle += std::to_string(*it) + "->";
        return "head links form a cycle: " + cycle + std::to_string(cur);
      }
      state[cur] = 1;
      path.push_back(cur);
      const int h = s.tokens[cur].head;
      if (h == kRootHead) break;
      cur = static_cast<std::size_t>(h);
    }
    for (std::size_t p : path) state[p] = 2;
  }
  return std::nullopt;
}

inline std::optional<std::string> span_problem(const AnnotatedSentence& s) {
  const std::size_t n = s.size();
  auto check = [n](const Span& sp, const char* name) -> std::optional<std::string> {
    if (sp.begin > sp.end) return std::string(name) + " span is empty";
    if (sp.end >= n) {
      return std::string(name) + " span " + std::to_string(sp.begin) + ".." +
             std::to_string(sp.end) + " exceeds " + std::to_string(n) + " tokens";
    }
    return std::nullopt;
  };
  if (auto p = check(s.cause, "cause")) return p;
  if (auto p = check(s.effect, "effect")) return p;
  if (s.cause.overlaps(s.effect)) return std::string("cause and effect spans overlap");
  return std::nullopt;
}

inline std::optional<std::string> pos_problem(const AnnotatedSentence& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& pos = s.tokens[i].pos;
    if (pos.empty() || pos == "_") return "token " + std::to_string(i) + " has no POS tag";
  }
  return std::nullopt;
}

inline void check_tree(const AnnotatedSentence& s) {
  if (auto p = tree_problem(s)) throw ValidationError("sentence '" + s.id + "': " + *p);
}

inline void check_spans(const AnnotatedSentence& s) {
  if (auto p = span_problem(s)) throw ValidationError("sentence '" + s.id + "': " + *p);
}

// ---------------------------------------------------------------------------
// Labels

/// Padded label layout: [START][tokens][END][PAD...], specials and pads are
/// class 1, cause tokens 2, effect tokens 3, all other tokens 4.
inline LabelSequence label_sequence(const AnnotatedSentence& s, std::size_t padded_len) {
  if (padded_len < s.size() + 2) {
    throw PreconditionError("padded length " + std::to_string(padded_len) + " cannot hold " +
                            std::to_string(s.size()) + " tokens plus start/end");
  }
  check_spans(s);
  LabelSequence labels(padded_len, TokenClass::kSpecial);
  for (std::size_t i = 0; i < s.size(); ++i) {
    TokenClass c = TokenClass::kOther;
    if (s.cause.contains(i)) c = TokenClass::kCause;
    else if (s.effect.contains(i)) c = TokenClass::kEffect;
    labels[i + 1] = c;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Dependency adjacency

struct AdjacencyOptions {
  // Real tokens attend to themselves. Special and pad positions always do.
  bool self_loops = true;
  // Only the dependent→head direction is kept.
  bool directed = false;
};

/// Padded M×M neighbor matrix. Row i marks the positions token i attends to
/// in the dependency channel. Position p of the padded layout is token p−1.
class DependencyAdjacency {
 public:
  DependencyAdjacency() = default;
  explicit DependencyAdjacency(std::size_t padded_len)
      : size_(padded_len), bits_(padded_len * padded_len, 0) {}

  std::size_t size() const { return size_; }
  bool operator()(std::size_t i, std::size_t k) const { return bits_[i * size_ + k] != 0; }
  void set(std::size_t i, std::size_t k, bool value = true) { bits_[i * size_ + k] = value; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < size_; ++k) {
      if ((*this)(i, k)) out.push_back(k);
    }
    return out;
  }

  // True entries off the diagonal.
  std::size_t edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < size_; ++i) {
      for (std::size_t k = 0; k < size_; ++k) count += (i != k && (*this)(i, k));
    }
    return count;
  }

  bool symmetric() const {
    for (std::size_t i = 0; i < size_; ++i) {
      for (std::size_t k = i + 1; k < size_; ++k) {
        if ((*this)(i, k) != (*this)(k, i)) return false;
      }
    }
    return true;
  }

  bool operator==(const DependencyAdjacency&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline DependencyAdjacency build_adjacency(const AnnotatedSentence& s, std::size_t padded_len,
                                           const AdjacencyOptions& options = {}) {
  if (padded_len < s.size() + 2) {
    throw PreconditionError("padded length " + std::to_string(padded_len) + " cannot hold " +
                            std::to_string(s.size()) + " tokens plus start/end");
  }
  check_tree(s);
  DependencyAdjacency adj(padded_len);
  for (std::size_t p = 0; p < padded_len; ++p) {
    const bool real = p >= 1 && p <= s.size();
    if (!real || options.self_loops) adj.set(p, p);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int h = s.tokens[i].head;
    if (h == kRootHead) continue;
    const std::size_t child = i + 1, head = static_cast<std::size_t>(h) + 1;
    adj.set(child, head);
    if (!options.directed) adj.set(head, child);
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Splitting

struct DatasetSplit {
  std::vector<AnnotatedSentence> train;
  std::vector<AnnotatedSentence> test;
  std::vector<AnnotatedSentence> validation;
  std::vector<std::string> warnings;
};

/// Seeded shuffle, then test and validation take floor(n·ratio) sentences
/// and train keeps the remainder. `ratios` is {train, test, validation}.
inline DatasetSplit split_dataset(std::vector<AnnotatedSentence> sentences,
                                  std::array<double, 3> ratios, std::uint64_t seed) {
  if (sentences.empty()) throw PreconditionError("split_dataset: empty input");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw PreconditionError("split_dataset: ratios must be non-negative and sum to 1");
  }
  const std::size_t n = sentences.size();
  // The small slack keeps 0.3·100 from landing just under 30.
  const auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_test = part(ratios[1]);
  const std::size_t n_val = part(ratios[2]);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  DatasetSplit out;
  const std::size_t n_train = n - n_test - n_val;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = sentences[order[i]];
    if (i < n_train) out.train.push_back(std::move(s));
    else if (i < n_train + n_test) out.test.push_back(std::move(s));
    else out.validation.push_back(std::move(s));
  }
  if (out.train.empty()) out.warnings.push_back("train partition is empty");
  if (out.test.empty()) out.warnings.push_back("test partition is empty");
  if (out.validation.empty()) out.warnings.push_back("validation partition is empty");
  return out;
}

/// Parses "6:3:1" style ratio strings into normalized {train, test, validation}.
inline std::array<double, 3> parse_split_ratios(const std::string& text) {
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    pieces.push_back(text.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (pieces.size() != 3) {
    throw PreconditionError("bad split ratio '" + text + "', expected three parts like 6:3:1");
  }
  std::array<double, 3> parts{};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      parts[i] = std::stod(pieces[i], &used);
      if (used != pieces[i].size()) throw std::invalid_argument(pieces[i]);
    } catch (const std::exception&) {
      throw PreconditionError("bad split ratio '" + text + "', expected e.g. 6:3:1");
    }
  }
  const double total = parts[0] + parts[1] + parts[2];
  if (!(total > 0) || parts[0] < 0 || parts[1] < 0 || parts[2] < 0) {
    throw PreconditionError("bad split ratio '" + text + "'");
  }
  for (auto& p : parts) p /= total;
  return parts;
}

/// "Vitamin D deficiency causes diabetes", hand-annotated.
inline AnnotatedSentence vitamin_d_example() {
  AnnotatedSentence s;
  s.id = "vitamin-d";
  s.tokens = {{"Vitamin", "NOUN", 1, "compound"},
              {"D", "NOUN", 2, "compound"},
              {"deficiency", "NOUN", 3, "nsubj"},
              {"causes", "VERB", kRootHead, "ROOT"},
              {"diabetes", "NOUN", 3, "dobj"}};
  s.cause = Span{0, 2};
  s.effect = Span{4, 4};
  return s;
}

}  // namespace depcause
