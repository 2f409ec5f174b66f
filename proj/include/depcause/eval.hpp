#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "depcause/corpus.hpp"
#include "depcause/model.hpp"
#include "json.hpp"

namespace depcause {

/// Decoded classes for the real tokens of one sentence.
struct Prediction {
  std::vector<TokenClass> classes;  // kCause, kEffect or kOther per token
  std::vector<std::size_t> cause_tokens;
  std::vector<std::size_t> effect_tokens;
};

/// Argmax over the K logits of each real-token row (ties go to the lowest
/// class id). A real token whose argmax is Special is reported as Other.
template <typename T>
Prediction decode_rows(std::span<const T> logits, std::size_t first_row, std::size_t tokens) {
  Prediction p;
  for (std::size_t i = 0; i < tokens; ++i) {
    const std::size_t row = first_row + 1 + i;
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (logits[row * kNumClasses + c] > logits[row * kNumClasses + best]) best = c;
    }
    auto cls = static_cast<TokenClass>(best + 1);
    if (cls == TokenClass::kSpecial) cls = TokenClass::kOther;
    p.classes.push_back(cls);
    if (cls == TokenClass::kCause) p.cause_tokens.push_back(i);
    if (cls == TokenClass::kEffect) p.effect_tokens.push_back(i);
  }
  return p;
}

template <typename T>
std::vector<Prediction> decode_batch(const Tensor<T>& logits, const EncodedBatch& batch) {
  std::vector<Prediction> out;
  for (std::size_t b = 0; b < batch.batch; ++b) {
    out.push_back(decode_rows<T>(logits.values(), b * batch.padded_len, batch.lengths[b]));
  }
  return out;
}

/// Prediction for one sentence; its gold spans, if any, are not read.
template <typename T>
Prediction predict(const Model<T>& model, const Vocabulary& vocab, const AnnotatedSentence& s) {
  NoGradGuard guard;
  const AnnotatedSentence* ptr = &s;
  auto batch = make_batch(std::span<const AnnotatedSentence* const>(&ptr, 1), vocab,
                          model.config().max_len, model.config().adjacency_options(), false);
  return decode_batch(model.forward(batch).logits, batch).front();
}

inline std::vector<std::size_t> span_tokens(const Span& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = s.begin; i <= s.end; ++i) out.push_back(i);
  return out;
}

/// Exact match: predicted cause and effect token sets both equal gold.
inline bool exact_match(const Prediction& pred, const AnnotatedSentence& gold) {
  return pred.cause_tokens == span_tokens(gold.cause) &&
         pred.effect_tokens == span_tokens(gold.effect);
}

struct ClassScores {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool zero_division = false;

  void finalize() {
    zero_division = false;
    if (tp + fp == 0) {
      precision = 0;
      zero_division = true;
    } else {
      precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
      recall = 0;
      zero_division = true;
    } else {
      recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    f1 = precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
  }
};

struct EvalReport {
  ClassScores micro, cause, effect;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double exact_match = 0;
  std::size_t sentences = 0, exact_count = 0;
  std::size_t cause_support = 0, effect_support = 0;
  bool zero_division = false;

  nlohmann::ordered_json to_json() const {
    auto scores = [](const ClassScores& s) {
      nlohmann::ordered_json j;
      j["precision"] = s.precision;
      j["recall"] = s.recall;
      j["f1"] = s.f1;
      j["tp"] = s.tp;
      j["fp"] = s.fp;
      j["fn"] = s.fn;
      return j;
    };
    nlohmann::ordered_json j;
    j["precision"] = micro.precision;
    j["recall"] = micro.recall;
    j["f1"] = micro.f1;
    j["exact_match"] = exact_match;
    j["sentences"] = sentences;
    j["exact_count"] = exact_count;
    j["micro"] = scores(micro);
    j["cause"] = scores(cause);
    j["effect"] = scores(effect);
    j["macro"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["support"] = {{"cause", cause_support}, {"effect", effect_support}};
    j["zero_division"] = zero_division;
    return j;
  }

  void print(std::ostream& os) const {
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %8s\n", "class", "precision", "recall",
                  "f1", "support");
    os << line;
    auto row = [&](const char* name, double p, double r, double f, std::size_t support) {
      std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10.4f %8zu\n", name, p, r, f, support);
      os << line;
    };
    row("cause", cause.precision, cause.recall, cause.f1, cause_support);
    row("effect", effect.precision, effect.recall, effect.f1, effect_support);
    row("micro", micro.precision, micro.recall, micro.f1, cause_support + effect_support);
    row("macro", macro_precision, macro_recall, macro_f1, cause_support + effect_support);
    std::snprintf(line, sizeof line, "exact match: %.4f (%zu/%zu)%s\n", exact_match, exact_count,
                  sentences, zero_division ? "  [zero division]" : "");
    os << line;
  }
};

/// Token-level precision/recall/F1 for Cause and Effect, micro-pooled, plus
/// sentence exact-match accuracy. Specials are never counted.
inline EvalReport token_prf(const std::vector<Prediction>& preds,
                            const std::vector<AnnotatedSentence>& golds) {
  if (preds.size() != golds.size()) {
    throw DimensionError("token_prf: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(golds.size()) + " sentences");
  }
  EvalReport r;
  r.sentences = golds.size();
  for (std::size_t s = 0; s < golds.size(); ++s) {
    const auto& gold = golds[s];
    const auto& pred = preds[s];
    if (pred.classes.size() != gold.size()) {
      throw DimensionError("token_prf: sentence '" + gold.id + "' has " +
                           std::to_string(gold.size()) + " tokens but " +
                           std::to_string(pred.classes.size()) + " predictions");
    }
    auto labels = label_sequence(gold, gold.size() + 2);
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const TokenClass g = labels[i + 1];
      const TokenClass p = pred.classes[i];
      for (auto [cls, scores] : {std::pair{TokenClass::kCause, &r.cause},
                                 std::pair{TokenClass::kEffect, &r.effect}}) {
        if (p == cls && g == cls) ++scores->tp;
        else if (p == cls) ++scores->fp;
        else if (g == cls) ++scores->fn;
      }
    }
    r.cause_support += gold.cause.length();
    r.effect_support += gold.effect.length();
    if (exact_match(pred, gold)) ++r.exact_count;
  }
  r.micro.tp = r.cause.tp + r.effect.tp;
  r.micro.fp = r.cause.fp + r.effect.fp;
  r.micro.fn = r.cause.fn + r.effect.fn;
  r.cause.finalize();
  r.effect.finalize();
  r.micro.finalize();
  r.macro_precision = (r.cause.precision + r.effect.precision) / 2;
  r.macro_recall = (r.cause.recall + r.effect.recall) / 2;
  r.macro_f1 = (r.cause.f1 + r.effect.f1) / 2;
  r.zero_division = r.micro.zero_division || r.cause.zero_division || r.effect.zero_division;
  r.exact_match = r.sentences == 0 ? 0.0
                                   : static_cast<double>(r.exact_count) / static_cast<double>(r.sentences);
  return r;
}

namespace detail {

struct BatchedRun {
  std::vector<Prediction> predictions;
  double loss_sum = 0.0;
  std::size_t loss_rows = 0;
};

/// Forward passes in batches without gradient recording. With threads > 1
/// contiguous chunks of batches run concurrently; results are reassembled in
/// corpus order so the output does not depend on the thread count. The loss
/// is only computed for labelled input.
template <typename T>
BatchedRun run_batches(const Model<T>& model, const Vocabulary& vocab,
                       const std::vector<AnnotatedSentence>& data, std::size_t batch_size,
                       bool labelled, bool pad_in_loss, std::size_t threads) {
  BatchedRun out;
  if (data.empty()) return out;
  batch_size = std::max<std::size_t>(1, batch_size);
  const std::size_t n_batches = (data.size() + batch_size - 1) / batch_size;
  std::vector<std::vector<Prediction>> preds(n_batches);
  std::vector<double> loss_sum(n_batches, 0.0);
  std::vector<std::size_t> loss_rows(n_batches, 0);

  auto run = [&](std::size_t first, std::size_t last) {
    NoGradGuard guard;
    for (std::size_t b = first; b < last; ++b) {
      std::vector<const AnnotatedSentence*> ptrs;
      for (std::size_t i = b * batch_size; i < std::min(data.size(), (b + 1) * batch_size); ++i) {
        ptrs.push_back(&data[i]);
      }
      auto batch = make_batch(ptrs, vocab, model.config().max_len, model.config().adjacency_options(),
                              labelled);
      auto logits = model.forward(batch).logits;
      if (labelled) {
        auto loss = Model<T>::loss_from_logits(logits, batch, pad_in_loss);
        std::size_t rows = batch.rows();
        if (!pad_in_loss) {
          rows = static_cast<std::size_t>(std::count(batch.pad_mask.begin(), batch.pad_mask.end(), 1));
        }
        loss_sum[b] = static_cast<double>(loss.item()) * static_cast<double>(rows);
        loss_rows[b] = rows;
      }
      preds[b] = decode_batch(logits, batch);
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, n_batches);
  if (threads == 1) {
    run(0, n_batches);
  } else {
    std::vector<std::thread> workers;
    const std::size_t per = (n_batches + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t first = t * per, last = std::min(n_batches, first + per);
      if (first < last) workers.emplace_back(run, first, last);
    }
    for (auto& w : workers) w.join();
  }
  for (std::size_t b = 0; b < n_batches; ++b) {
    out.loss_sum += loss_sum[b];
    out.loss_rows += loss_rows[b];
    for (auto& p : preds[b]) out.predictions.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

struct EvalOutput {
  EvalReport report;
  std::vector<Prediction> predictions;
  double loss = 0.0;
};

/// Loss, predictions and scores on a labelled corpus.
template <typename T>
EvalOutput evaluate(const Model<T>& model, const Vocabulary& vocab,
                    const std::vector<AnnotatedSentence>& data, std::size_t batch_size = 64,
                    bool pad_in_loss = true, std::size_t threads = 1) {
  EvalOutput out;
  if (data.empty()) return out;
  auto run = detail::run_batches(model, vocab, data, batch_size, true, pad_in_loss, threads);
  out.loss = run.loss_sum / static_cast<double>(run.loss_rows);
  out.predictions = std::move(run.predictions);
  out.report = token_prf(out.predictions, data);
  return out;
}

/// Predictions only; gold spans are neither needed nor read.
template <typename T>
std::vector<Prediction> predict_all(const Model<T>& model, const Vocabulary& vocab,
                                    const std::vector<AnnotatedSentence>& data,
                                    std::size_t batch_size = 64, std::size_t threads = 1) {
  return detail::run_batches(model, vocab, data, batch_size, false, true, threads).predictions;
}

/// Maximal runs of consecutive token indices, as inclusive [begin, end] pairs.
inline std::vector<Span> contiguous_runs(const std::vector<std::size_t>& tokens) {
  std::vector<Span> runs;
  for (std::size_t i : tokens) {
    if (!runs.empty() && runs.back().end + 1 == i) runs.back().end = i;
    else runs.push_back(Span{i, i});
  }
  return runs;
}

inline nlohmann::ordered_json prediction_to_json(const Prediction& p, const AnnotatedSentence& s,
                                                 bool with_gold) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["tokens"] = nlohmann::ordered_json::array();
  for (const auto& t : s.tokens) j["tokens"].push_back(t.form);
  j["labels"] = nlohmann::ordered_json::array();
  for (auto c : p.classes) j["labels"].push_back(static_cast<int>(c));
  j["cause_tokens"] = p.cause_tokens;
  j["effect_tokens"] = p.effect_tokens;
  auto spans = [](const std::vector<std::size_t>& tokens) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : contiguous_runs(tokens)) arr.push_back({r.begin, r.end});
    return arr;
  };
  j["cause_spans"] = spans(p.cause_tokens);
  j["effect_spans"] = spans(p.effect_tokens);
  if (with_gold) j["exact_match"] = exact_match(p, s);
  return j;
}

}  // namespace depcause
