#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "depcause/depcause.hpp"
#include "json.hpp"

// depcause command line: gen-data, train, eval, predict, gradcheck,
// inspect-attention, validate.
//
// Exit codes: 0 success, 1 verification failure (gradcheck, validate),
// 2 usage or environment error.

namespace depcause::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerify = 1;
inline constexpr int kExitUsage = 2;

namespace fs = std::filesystem;

/// Seed precedence: explicit flag, then DEPCAUSE_SEED, then `fallback`.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DEPCAUSE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw PreconditionError(std::string("DEPCAUSE_SEED is not an unsigned integer: '") + env + "'");
  }
  return fallback;
}

inline bool env_seed_set() {
  const char* env = std::getenv("DEPCAUSE_SEED");
  return env && *env;
}

template <typename F>
decltype(auto) with_precision(const std::string& precision, F&& f) {
  if (precision == "float32") return f(float{});
  return f(double{});
}

inline std::vector<AnnotatedSentence> load_corpus(const fs::path& path, std::ostream& log) {
  if (!fs::exists(path)) throw PreconditionError("no such file: " + path.string());
  auto r = read_corpus_file(path);
  for (const auto& w : r.warnings) log << "[depcause] " << path.string() << ": " << w << "\n";
  return std::move(r.sentences);
}

inline std::size_t longest(const std::vector<AnnotatedSentence>& a) {
  std::size_t n = 0;
  for (const auto& s : a) n = std::max(n, s.size());
  return n;
}

struct Streams {
  std::ostream& out;
  std::ostream& log;
};

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
  std::string templates, lexicon, out, split = "6:3:1", format = "jsonl";
};

inline int gen_data(const GenDataArgs& a, Streams io) {
  const auto seed = resolve_seed(a.seed, 0);
  const auto templates = a.templates.empty() ? default_templates()
                                             : templates_from_json(read_json_file(a.templates));
  const auto lexicon = a.lexicon.empty() ? default_lexicon() : lexicon_from_json(read_json_file(a.lexicon));
  const auto ratios = parse_split_ratios(a.split);
  auto gen = generate(templates, lexicon, a.n, seed);
  auto split = split_dataset(gen.sentences, ratios, seed);
  for (const auto& w : split.warnings) io.log << "[depcause] warning: " << w << "\n";

  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw PreconditionError("cannot create output directory " + dir.string());
  const std::string ext = a.format == "conllu" ? ".conllu" : ".jsonl";
  nlohmann::ordered_json files;
  for (auto [name, part] : {std::pair{"train", &split.train}, std::pair{"test", &split.test},
                            std::pair{"validation", &split.validation}}) {
    const auto path = dir / (std::string(name) + ext);
    if (a.format == "conllu") {
      std::ostringstream os;
      write_conllu(os, *part);
      write_file_atomic(path, os.str());
    } else {
      write_jsonl_file(path, *part);
    }
    files[name] = {{"file", path.filename().string()}, {"sentences", part->size()}};
  }
  nlohmann::ordered_json manifest;
  manifest["seed"] = seed;
  manifest["n"] = a.n;
  manifest["split"] = a.split;
  manifest["format"] = a.format;
  manifest["active"] = gen.active;
  manifest["passive"] = gen.passive;
  manifest["capacity"] = gen.capacity;
  manifest["resampled"] = gen.resampled;
  manifest["templates"] = templates.size();
  manifest["cause_phrases"] = lexicon.causes.size();
  manifest["effect_phrases"] = lexicon.effects.size();
  manifest["templates_hash"] = templates_hash(templates);
  manifest["lexicon_hash"] = lexicon_hash(lexicon);
  manifest["files"] = files;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  io.log << "[depcause] generated " << a.n << " sentences (" << gen.active << " active, " << gen.passive
         << " passive): train " << split.train.size() << ", test " << split.test.size()
         << ", validation " << split.validation.size() << " -> " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, train, val, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation, precision;
  std::optional<std::size_t> dim, layers_left, layers_right, heads, batch_size, max_epochs, tolerance,
      max_steps, max_len;
  std::optional<double> lr, stop_train_loss;
  std::vector<std::string> set;
  bool no_timing = false;
};

/// Resolves defaults <- config file <- DEPCAUSE_SEED <- flags.
inline TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig c;
  bool file_seed = false;
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    apply_json(j, c);
    file_seed = j.is_object() && j.contains("seed");
  }
  if (!file_seed || a.seed) c.seed = resolve_seed(a.seed, c.seed);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw PreconditionError("--set expects KEY=VALUE, got '" + kv + "'");
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(kv.substr(eq + 1));
    } catch (const nlohmann::json::parse_error&) {
      value = kv.substr(eq + 1);
    }
    apply_json(nlohmann::json{{kv.substr(0, eq), value}}, c);
  }
  if (a.ablation) c.model.ablation = parse_ablation(*a.ablation);
  if (a.precision) c.precision = *a.precision;
  if (a.dim) c.model.dim = *a.dim;
  if (a.layers_left) c.model.layers_left = *a.layers_left;
  if (a.layers_right) c.model.layers_right = *a.layers_right;
  if (a.heads) c.model.heads = *a.heads;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.max_epochs) c.max_epochs = *a.max_epochs;
  if (a.tolerance) c.tolerance = *a.tolerance;
  if (a.max_steps) c.max_steps = *a.max_steps;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.stop_train_loss) c.stop_train_loss = *a.stop_train_loss;
  if (a.no_timing) c.record_timing = false;
  c.validate();
  return c;
}

inline int train_command(const TrainArgs& a, Streams io) {
  TrainConfig config = resolve_train_config(a);
  const auto train_set = load_corpus(a.train, io.log);
  const auto val_set = a.val.empty() ? std::vector<AnnotatedSentence>{} : load_corpus(a.val, io.log);
  if (train_set.empty()) throw PreconditionError("training file has no sentences: " + a.train);
  const std::size_t len = std::max({longest(train_set) + 2, longest(val_set) + 2, a.max_len.value_or(0)});
  const Vocabulary vocab = build_vocab(train_set, len);
  config.model = sized_for(config.model, vocab);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw PreconditionError("cannot create output directory " + dir.string());

  io.log << "[depcause] training " << to_string(config.model.ablation) << " model: " << train_set.size()
         << " train / " << val_set.size() << " validation sentences, vocab " << vocab.token_count()
         << ", max_len " << vocab.max_len() << ", seed " << config.seed << ", " << config.precision << "\n";

  return with_precision(config.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(config.model, config.seed);
    io.log << "[depcause] parameters: " << model.parameter_count() << "\n";
    auto result = train(model, vocab, config, train_set, val_set, [&](const EpochRecord& r) {
      char line[200];
      std::snprintf(line, sizeof line,
                    "[depcause] epoch %zu  train_loss %.6f  val_loss %.6f  val_exact %.4f  val_f1 %.4f  %.2fs\n",
                    r.epoch, r.train_loss, r.val_loss, r.val_exact_match, r.val_f1, r.seconds);
      io.log << line;
    });
    for (const auto& w : result.warnings) io.log << "[depcause] warning: " << w << "\n";
    io.log << "[depcause] stopped: " << result.stop_reason << "; best epoch " << result.best_epoch << "\n";

    save_checkpoint(dir, model, vocab, config);
    write_file_atomic(dir / "history.csv", history_csv(result.history));
    write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");

    const auto on_train = evaluate(model, vocab, train_set, 64, config.pad_in_loss);
    char line[200];
    std::snprintf(line, sizeof line, "final train loss: %.6g\ntrain exact match: %.4f\n", on_train.loss,
                  on_train.report.exact_match);
    io.out << line;
    if (!val_set.empty()) {
      const auto on_val = evaluate(model, vocab, val_set, 64, config.pad_in_loss);
      std::snprintf(line, sizeof line, "validation loss: %.6g\n", on_val.loss);
      io.out << line;
      on_val.report.print(io.out);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, per_sentence, out;
  bool json = false;
  std::size_t threads = 1, batch_size = 64;
};

inline int eval_command(const EvalArgs& a, Streams io) {
  const auto data = load_corpus(a.data, io.log);
  const auto precision = read_checkpoint_config(a.checkpoint).precision;
  return with_precision(precision, [&](auto tag) {
    using T = decltype(tag);
    const auto ck = load_checkpoint<T>(a.checkpoint);
    const auto res = evaluate(ck.model, ck.vocab, data, a.batch_size, ck.config.pad_in_loss, a.threads);
    auto j = res.report.to_json();
    j["loss"] = res.loss;
    if (a.json) {
      io.out << j.dump(2) << "\n";
    } else {
      res.report.print(io.out);
    }
    if (!a.out.empty()) write_file_atomic(a.out, j.dump(2) + "\n");
    if (!a.per_sentence.empty()) {
      std::string lines;
      for (std::size_t i = 0; i < data.size(); ++i) {
        lines += prediction_to_json(res.predictions[i], data[i], true).dump() + "\n";
      }
      write_file_atomic(a.per_sentence, lines);
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, annotated, data, out;
  std::size_t threads = 1;
};

inline int predict_command(const PredictArgs& a, Streams io) {
  std::vector<AnnotatedSentence> sentences;
  const bool with_gold = !a.data.empty();
  if (with_gold) {
    sentences = load_corpus(a.data, io.log);
  } else {
    if (!fs::exists(a.annotated)) throw PreconditionError("no such file: " + a.annotated);
    sentences = read_conllu_file(a.annotated, false).sentences;
  }
  const auto precision = read_checkpoint_config(a.checkpoint).precision;
  return with_precision(precision, [&](auto tag) {
    using T = decltype(tag);
    const auto ck = load_checkpoint<T>(a.checkpoint);
    const auto preds = predict_all(ck.model, ck.vocab, sentences, 64, a.threads);
    std::string lines;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      lines += prediction_to_json(preds[i], sentences[i], with_gold).dump() + "\n";
    }
    if (a.out.empty()) io.out << lines;
    else write_file_atomic(a.out, lines);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string config, sentence;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-4;
  double step = 1e-5;
};

inline int gradcheck_command(const GradcheckArgs& a, Streams io) {
  TrainConfig c;
  c.model.dim = 16;
  c.model.layers_left = 1;
  c.model.layers_right = 1;
  if (!a.config.empty()) apply_json(read_json_file(a.config), c);
  c.model.validate();
  AnnotatedSentence s = vitamin_d_example();
  if (!a.sentence.empty()) {
    const auto corpus = load_corpus(a.sentence, io.log);
    if (corpus.empty()) throw PreconditionError("no sentence in " + a.sentence);
    s = corpus.front();
  }
  const auto seed = resolve_seed(a.seed, 0);
  io.log << "[depcause] gradcheck: d=" << c.model.dim << " L=" << c.model.layers_left << "/"
         << c.model.layers_right << " seed " << seed << " sentence '" << s.id << "'\n";
  const auto report = model_gradcheck<double>(c.model, s, seed, a.tolerance, a.step);
  report.print(io.out);
  return report.pass ? kExitOk : kExitVerify;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string checkpoint, data, sentence_id, out, tower = "right";
  std::size_t layer = 0, head = 0;
};

inline int inspect_command(const InspectArgs& a, Streams io) {
  std::vector<AnnotatedSentence> corpus;
  if (a.data.empty()) {
    corpus.push_back(vitamin_d_example());
  } else if (fs::path(a.data).extension() == ".conllu") {
    if (!fs::exists(a.data)) throw PreconditionError("no such file: " + a.data);
    corpus = read_conllu_file(a.data, false).sentences;
  } else {
    corpus = load_corpus(a.data, io.log);
  }
  const AnnotatedSentence* s = nullptr;
  for (const auto& c : corpus) {
    if (a.sentence_id.empty() || c.id == a.sentence_id) {
      s = &c;
      break;
    }
  }
  if (!s) throw PreconditionError("sentence '" + a.sentence_id + "' not found");

  const auto ck = load_checkpoint<double>(a.checkpoint);
  const auto& mc = ck.model.config();
  const bool right = a.tower == "right";
  if (right && mc.ablation == Ablation::kLeftOnly) throw PreconditionError("checkpoint has no right tower");
  if (!right && mc.ablation == Ablation::kRightOnly) throw PreconditionError("checkpoint has no left tower");
  const std::size_t layers = right ? mc.layers_right : mc.layers_left;
  const std::size_t heads = right ? mc.right_heads : mc.heads;
  if (a.layer >= layers) {
    throw PreconditionError("--layer " + std::to_string(a.layer) + " out of range; tower has " +
                            std::to_string(layers) + " layers");
  }
  if (a.head >= heads) throw PreconditionError("--head out of range; tower has " + std::to_string(heads));

  NoGradGuard guard;
  const AnnotatedSentence* ptr = s;
  const auto batch = make_batch(std::span<const AnnotatedSentence* const>(&ptr, 1), ck.vocab, mc.max_len,
                                mc.adjacency_options(), false);
  ForwardOptions<double> opt;
  opt.capture_attention = true;
  const auto fwd = ck.model.forward(batch, opt);
  const auto& alpha = (right ? fwd.right_attention : fwd.left_attention)[a.layer][a.head];
  const auto values = alpha.values();
  const std::size_t m = batch.padded_len, n = s->size() + 2;

  nlohmann::ordered_json j;
  j["id"] = s->id;
  j["tower"] = a.tower;
  j["layer"] = a.layer;
  j["head"] = a.head;
  j["tokens"] = nlohmann::ordered_json::array();
  j["tokens"].push_back(kReservedTokens[kStartId]);
  for (const auto& t : s->tokens) j["tokens"].push_back(t.form);
  j["tokens"].push_back(kReservedTokens[kEndId]);
  j["padded_len"] = m;
  j["alpha"] = nlohmann::ordered_json::array();
  j["adjacency"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < n; ++r) {
    nlohmann::ordered_json arow = nlohmann::ordered_json::array(), mrow = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < n; ++c) {
      arow.push_back(values[r * m + c]);
      mrow.push_back(right ? static_cast<int>(batch.adjacency[r * m + c]) : static_cast<int>(batch.key_mask[r * m + c]));
    }
    j["alpha"].push_back(arow);
    j["adjacency"].push_back(mrow);
  }
  const auto text = j.dump(2) + "\n";
  if (a.out.empty()) io.out << text;
  else write_file_atomic(a.out, text);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::vector<std::string> data;
  bool verbose = false;
};

inline int validate_command(const ValidateArgs& a, Streams io) {
  bool ok = true;
  for (const auto& path : a.data) {
    std::vector<AnnotatedSentence> corpus;
    try {
      corpus = load_corpus(path, io.log);
    } catch (const ValidationError& e) {
      io.out << path << ": invalid: " << e.what() << "\n";
      ok = false;
      continue;
    }
    const auto r = validate_corpus(corpus);
    io.out << path << ": " << r.sentences << " sentences, " << r.tree_violations << " tree, "
           << r.span_violations << " span, " << r.pos_violations << " pos violations\n";
    const std::size_t shown = a.verbose ? r.details.size() : std::min<std::size_t>(r.details.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) io.out << "  " << r.details[i] << "\n";
    if (shown < r.details.size()) io.out << "  ... " << r.details.size() - shown << " more\n";
    ok = ok && r.total() == 0;
  }
  return ok ? kExitOk : kExitVerify;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& log = std::cerr) {
  CLI::App app{"depcause: dependency-aware cause/effect span tagger"};
  app.name("depcause");
  app.require_subcommand(1);
  Streams io{out, log};

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic causal corpus and split it");
  gen_cmd->add_option("--n", gen.n, "Number of sentences")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Seed (default: DEPCAUSE_SEED or 0)");
  gen_cmd->add_option("--templates", gen.templates, "Template JSON file (default: built-in)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--lexicon", gen.lexicon, "Lexicon JSON file (default: built-in)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--split", gen.split, "train:test:validation ratios")->capture_default_str();
  gen_cmd->add_option("--format", gen.format, "Corpus file format")
      ->check(CLI::IsMember({"jsonl", "conllu"}))
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  train_cmd->add_option("--config", tr.config, "JSON config file (TrainConfig field names)")->check(CLI::ExistingFile);
  train_cmd->add_option("--train", tr.train, "Training corpus (.jsonl or .conllu)")->required();
  train_cmd->add_option("--val", tr.val, "Validation corpus");
  train_cmd->add_option("--out-dir", tr.out_dir, "Checkpoint/output directory")->required();
  train_cmd->add_option("--seed", tr.seed, "Seed (default: config, DEPCAUSE_SEED, or 0)");
  train_cmd->add_option("--ablation", tr.ablation, "none | left-only | right-only");
  train_cmd->add_option("--precision", tr.precision, "float64 | float32");
  train_cmd->add_option("--dim", tr.dim, "Hidden size d");
  train_cmd->add_option("--layers-left", tr.layers_left, "Left tower layers");
  train_cmd->add_option("--layers-right", tr.layers_right, "Right tower layers");
  train_cmd->add_option("--heads", tr.heads, "Left tower attention heads");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Epoch limit");
  train_cmd->add_option("--tolerance", tr.tolerance, "Early-stopping patience in epochs");
  train_cmd->add_option("--max-steps", tr.max_steps, "Optimizer step limit (0: none)");
  train_cmd->add_option("--stop-train-loss", tr.stop_train_loss, "Stop once an epoch's train loss is below this");
  train_cmd->add_option("--max-len", tr.max_len, "Minimum padded length M");
  train_cmd->add_option("--set", tr.set, "Override any config field: KEY=VALUE (repeatable)");
  train_cmd->add_flag("--no-timing", tr.no_timing, "Write 0 seconds in history.csv (byte-identical reruns)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled corpus");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Labelled corpus")->required();
  eval_cmd->add_flag("--json", ev.json, "Print the report as JSON");
  eval_cmd->add_option("--out", ev.out, "Also write the JSON report to this file");
  eval_cmd->add_option("--per-sentence", ev.per_sentence, "Write per-sentence predictions (JSONL)");
  eval_cmd->add_option("--threads", ev.threads, "Evaluation threads")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--batch-size", ev.batch_size, "Evaluation batch size")->check(CLI::PositiveNumber)->capture_default_str();

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Predict cause/effect spans (JSONL output)");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  auto* ann = predict_cmd->add_option("--text-with-annotations", pr.annotated,
                                      "CoNLL-U file with POS and heads; span comments optional");
  auto* dat = predict_cmd->add_option("--data", pr.data, "Labelled corpus; output includes exact_match");
  ann->excludes(dat);
  dat->excludes(ann);
  predict_cmd->add_option("--out", pr.out, "Output file (default: stdout)");
  predict_cmd->add_option("--threads", pr.threads, "Threads")->check(CLI::PositiveNumber);

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare autograd with finite differences");
  gc_cmd->add_option("--config", gc.config, "JSON config (default d=16, one layer per tower)")->check(CLI::ExistingFile);
  gc_cmd->add_option("--sentence", gc.sentence, "Corpus file; the first sentence is used (default: built-in example)")
      ->check(CLI::ExistingFile);
  gc_cmd->add_option("--seed", gc.seed, "Initialisation seed (default: DEPCAUSE_SEED or 0)");
  gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "Central-difference step")->capture_default_str();

  InspectArgs in;
  auto* in_cmd = app.add_subcommand("inspect-attention", "Dump attention weights and mask as JSON");
  in_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint directory")->required();
  in_cmd->add_option("--data", in.data, "Corpus file (default: built-in example sentence)");
  in_cmd->add_option("--sentence-id", in.sentence_id, "Sentence id (default: first)");
  in_cmd->add_option("--layer", in.layer, "Layer index, from 0")->capture_default_str();
  in_cmd->add_option("--head", in.head, "Head index, from 0")->capture_default_str();
  in_cmd->add_option("--tower", in.tower, "right | left")->check(CLI::IsMember({"right", "left"}))->capture_default_str();
  in_cmd->add_option("--out", in.out, "Output file (default: stdout)");

  ValidateArgs va;
  auto* va_cmd = app.add_subcommand("validate", "Check corpus trees, spans and POS tags");
  va_cmd->add_option("--data", va.data, "Corpus files")->required();
  va_cmd->add_flag("--verbose", va.verbose, "List every violation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, log);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, io);
    if (*train_cmd) {
      if (!fs::exists(tr.train)) throw PreconditionError("no such file: " + tr.train);
      if (!tr.val.empty() && !fs::exists(tr.val)) throw PreconditionError("no such file: " + tr.val);
      return train_command(tr, io);
    }
    if (*eval_cmd) return eval_command(ev, io);
    if (*predict_cmd) {
      if (pr.annotated.empty() && pr.data.empty()) {
        throw PreconditionError("predict needs --text-with-annotations or --data");
      }
      return predict_command(pr, io);
    }
    if (*gc_cmd) return gradcheck_command(gc, io);
    if (*in_cmd) return inspect_command(in, io);
    if (*va_cmd) return validate_command(va, io);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace depcause::cli
