#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "depcause/adam.hpp"
#include "depcause/config.hpp"
#include "depcause/eval.hpp"
#include "depcause/model.hpp"

namespace depcause {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_exact_match = 0;
  double val_f1 = 0;
  double seconds = 0;
  std::size_t steps = 0;  // cumulative optimizer steps
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  std::string stop_reason;
  std::vector<std::string> warnings;
};

inline std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,val_exact_match,val_f1,seconds\n";
  char line[256];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.6f,%.6f,%.3f\n", r.epoch, r.train_loss,
                  r.val_loss, r.val_exact_match, r.val_f1, r.seconds);
    out += line;
  }
  return out;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam over shuffled mini-batches with early stopping on validation loss.
///
/// After every epoch the validation loss is computed; the parameters of the
/// best epoch are kept and restored into `model` on return. Training stops
/// after `tolerance` epochs without improvement, at `max_epochs`, at
/// `max_steps`, or once the epoch train loss drops below `stop_train_loss`.
/// With an empty validation set the train loss drives early stopping.
template <typename T>
TrainResult train(Model<T>& model, const Vocabulary& vocab, const TrainConfig& config,
                  const std::vector<AnnotatedSentence>& train_set,
                  const std::vector<AnnotatedSentence>& validation_set,
                  const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw PreconditionError("train: empty training set");
  TrainResult result;
  const bool use_validation = !validation_set.empty();
  if (!use_validation) {
    result.warnings.push_back("validation set is empty; early stopping uses train loss");
  }
  const auto& mc = model.config();
  auto params = model.parameters();
  AdamState<T> adam(params);
  const AdamHyper hp{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps};

  std::vector<std::vector<T>> best(params.size());
  auto snapshot = [&] {
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto v = params[p].second.values();
      best[p].assign(v.begin(), v.end());
    }
  };
  snapshot();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    bool step_cap = false;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      std::vector<const AnnotatedSentence*> ptrs;
      for (std::size_t i = first; i < std::min(order.size(), first + config.batch_size); ++i) {
        ptrs.push_back(&train_set[order[i]]);
      }
      auto batch = make_batch(ptrs, vocab, mc.max_len, mc.adjacency_options());
      model.zero_grad();
      auto loss = model.loss(batch, config.pad_in_loss);
      backward(loss);
      if (config.clip_norm > 0) clip_gradients(params, config.clip_norm);
      adam_step(params, adam, hp);
      ++result.steps;
      const std::size_t rows =
          config.pad_in_loss
              ? batch.rows()
              : static_cast<std::size_t>(std::count(batch.pad_mask.begin(), batch.pad_mask.end(), 1));
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(rows);
      loss_rows += rows;
      if (config.max_steps > 0 && result.steps >= config.max_steps) {
        step_cap = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = result.steps;
    rec.train_loss = loss_sum / static_cast<double>(loss_rows);
    if (use_validation) {
      auto ev = evaluate(model, vocab, validation_set, 64, config.pad_in_loss);
      rec.val_loss = ev.loss;
      rec.val_exact_match = ev.report.exact_match;
      rec.val_f1 = ev.report.micro.f1;
    } else {
      rec.val_loss = std::numeric_limits<double>::quiet_NaN();
      rec.val_exact_match = std::numeric_limits<double>::quiet_NaN();
      rec.val_f1 = std::numeric_limits<double>::quiet_NaN();
    }
    if (config.record_timing) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    const double signal = use_validation ? rec.val_loss : rec.train_loss;
    if (!std::isfinite(signal)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    }
    if (signal < result.best_loss) {
      result.best_loss = signal;
      result.best_epoch = epoch;
      since_best = 0;
      snapshot();
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (since_best >= config.tolerance) {
      result.stop_reason = "early stopping: no improvement for " + std::to_string(since_best) + " epochs";
      break;
    }
    if (config.stop_train_loss > 0 && rec.train_loss < config.stop_train_loss) {
      result.stop_reason = "train loss below target";
      break;
    }
    if (step_cap) {
      result.stop_reason = "step limit reached";
      break;
    }
    if (epoch == config.max_epochs) result.stop_reason = "max epochs reached";
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto v = params[p].second.mutable_values();
    std::copy(best[p].begin(), best[p].end(), v.begin());
  }
  return result;
}

}  // namespace depcause
