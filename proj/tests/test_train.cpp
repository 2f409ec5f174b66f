#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace depcause;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("depcause_train_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<AnnotatedSentence> small_corpus(std::size_t n, std::uint64_t seed) {
  return generate(default_templates(), default_lexicon(), n, seed).sentences;
}

TrainConfig quick_config(const Vocabulary& vocab, std::size_t dim = 16) {
  TrainConfig c;
  c.model = sized_for(fixture::small_config(dim), vocab);
  c.batch_size = 4;
  c.max_epochs = 3;
  c.tolerance = 2;
  c.seed = 5;
  c.record_timing = false;
  return c;
}

}  // namespace

// Scalar Adam written out longhand, used as the oracle for adam_step.
TEST(Adam, MatchesLonghandTrace) {
  auto theta = Tensor<double>::from({2}, {1.0, -0.5}, true);
  std::vector<NamedTensor<double>> params = {{"theta", theta}};
  AdamState<double> state(params);
  const AdamHyper hp{0.1, 0.9, 0.999, 1e-8};

  double ref[2] = {1.0, -0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int step = 1; step <= 5; ++step) {
    theta.zero_grad();
    backward(sum(mul(theta, theta)));  // gradient 2θ
    adam_step(params, state, hp);
    for (int i = 0; i < 2; ++i) {
      const double g = 2 * ref[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    if (step == 1) {
      EXPECT_NEAR(theta.values()[0], 1.0 - 0.2 / (2.0 + 1e-8), 1e-15);
    }
    EXPECT_NEAR(theta.values()[0], ref[0], 1e-14);
    EXPECT_NEAR(theta.values()[1], ref[1], 1e-14);
  }
  EXPECT_EQ(state.step, 5u);
}

TEST(Adam, NonFiniteGradientNamesParameterAndLeavesValues) {
  auto w = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto u = Tensor<double>::from({2}, {3.0, 4.0}, true);
  std::vector<NamedTensor<double>> params = {{"layer.u", u}, {"layer.w", w}};
  AdamState<double> state(params);
  const auto poison = Tensor<double>::from({2}, {0.0, std::nan("")});
  backward(add(sum(u), sum(mul(w, poison))));
  try {
    adam_step(params, state, AdamHyper{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.w"), std::string::npos) << e.what();
  }
  EXPECT_EQ(u.values()[0], 3.0);
  EXPECT_EQ(w.values()[0], 1.0);
  EXPECT_EQ(state.step, 0u);
}

TEST(Adam, ClipScalesToMaxNorm) {
  auto w = Tensor<double>::from({2}, {0.0, 0.0}, true);
  std::vector<NamedTensor<double>> params = {{"w", w}};
  backward(sum(mul(w, Tensor<double>::from({2}, {3.0, 4.0}))));
  EXPECT_DOUBLE_EQ(clip_gradients(params, 1.0), 5.0);
  EXPECT_NEAR(w.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(w.grad()[1], 0.8, 1e-15);
  EXPECT_NEAR(clip_gradients(params, 10.0), 1.0, 1e-15);  // under the cap: untouched
  EXPECT_NEAR(w.grad()[1], 0.8, 1e-15);
}

TEST(Config, ValidationRules) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tolerance = c.max_epochs;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.model.heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.precision = "float16";
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  TrainConfig c;
  c.learning_rate = 3e-4;
  c.model.dim = 32;
  c.model.ablation = Ablation::kRightOnly;
  c.model.standard_layernorm = true;
  TrainConfig back;
  apply_json(nlohmann::json::parse(to_json(c).dump()), back);
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  try {
    apply_json(nlohmann::json{{"learning_rat", 1.0}}, back);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "learning_rat");
  }
  EXPECT_THROW(apply_json(nlohmann::json{{"dim", "big"}}, back), SchemaError);
}

TEST(Training, SingleBatchLossFallsNinetyPercentFromLnFour) {
  const auto corpus = small_corpus(8, 3);
  const auto vocab = build_vocab(corpus);
  Model<double> model(sized_for(fixture::small_config(32), vocab), 1);
  const auto batch = make_batch(corpus, vocab, vocab.max_len());
  auto params = model.parameters();
  AdamState<double> adam(params);
  const double start = model.loss(batch).item();
  EXPECT_NEAR(start, std::log(4.0), 1e-12);
  double last = start;
  for (int step = 0; step < 200; ++step) {
    model.zero_grad();
    auto loss = model.loss(batch);
    last = loss.item();
    backward(loss);
    adam_step(params, adam, AdamHyper{1e-3});
  }
  EXPECT_LE(last, 0.1 * start) << "loss after 200 steps: " << last;
}

TEST(Training, EarlyStopsOnWorseningValidationAndRestoresBest) {
  // Validation labels are the training labels with cause and effect swapped,
  // so fitting the training set drives validation loss up.
  const auto train_set = small_corpus(16, 9);
  auto val_set = train_set;
  for (auto& s : val_set) std::swap(s.cause, s.effect);
  const auto vocab = build_vocab(train_set);
  auto config = quick_config(vocab);
  config.max_epochs = 20;
  config.tolerance = 1;
  config.learning_rate = 1e-2;
  Model<double> model(config.model, config.seed);
  // Start from a model fitted to the validation labels so that every epoch
  // on the swapped labels makes validation worse.
  auto warm = config;
  warm.max_epochs = 15;
  warm.tolerance = 14;
  train(model, vocab, warm, val_set, {});
  const auto result = train(model, vocab, config, train_set, val_set);
  ASSERT_EQ(result.history.size(), 2u);
  EXPECT_GT(result.history[1].val_loss, result.history[0].val_loss);
  EXPECT_EQ(result.best_epoch, 1u);
  EXPECT_NE(result.stop_reason.find("early stopping"), std::string::npos);
  // Restored parameters reproduce the best recorded validation loss.
  EXPECT_DOUBLE_EQ(evaluate(model, vocab, val_set).loss, result.history[0].val_loss);
}

TEST(Training, ReturnedModelIsNeverWorseThanAnyRecordedEpoch) {
  const auto corpus = small_corpus(24, 4);
  const std::vector<AnnotatedSentence> train_set(corpus.begin(), corpus.begin() + 16);
  const std::vector<AnnotatedSentence> val_set(corpus.begin() + 16, corpus.end());
  std::size_t longest = 0;
  for (const auto& s : corpus) longest = std::max(longest, s.size());
  const auto vocab = build_vocab(train_set, longest + 2);
  auto config = quick_config(vocab);
  config.max_epochs = 6;
  config.tolerance = 5;
  Model<double> model(config.model, config.seed);
  const auto result = train(model, vocab, config, train_set, val_set);
  const double final_loss = evaluate(model, vocab, val_set).loss;
  for (const auto& r : result.history) EXPECT_LE(final_loss, r.val_loss);
}

TEST(Training, EmptyValidationWarnsAndUsesTrainLoss) {
  const auto corpus = small_corpus(8, 2);
  const auto vocab = build_vocab(corpus);
  auto config = quick_config(vocab);
  Model<double> model(config.model, config.seed);
  const auto result = train(model, vocab, config, corpus, {});
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_TRUE(std::isnan(result.history[0].val_loss));
  EXPECT_THROW(train(model, vocab, config, {}, {}), PreconditionError);
}

TEST(Training, StepLimitAndTargetLossStop) {
  const auto corpus = small_corpus(8, 2);
  const auto vocab = build_vocab(corpus);
  auto config = quick_config(vocab);
  config.max_steps = 3;
  Model<double> model(config.model, config.seed);
  auto result = train(model, vocab, config, corpus, {});
  EXPECT_EQ(result.steps, 3u);
  EXPECT_EQ(result.stop_reason, "step limit reached");

  config.max_steps = 0;
  config.stop_train_loss = 100.0;
  Model<double> again(config.model, config.seed);
  result = train(again, vocab, config, corpus, {});
  EXPECT_EQ(result.history.size(), 1u);
  EXPECT_EQ(result.stop_reason, "train loss below target");
}

TEST(Training, FloatPrecisionTrains) {
  const auto corpus = small_corpus(8, 2);
  const auto vocab = build_vocab(corpus);
  auto config = quick_config(vocab);
  config.precision = "float32";
  Model<float> model(config.model, config.seed);
  const auto result = train(model, vocab, config, corpus, {});
  EXPECT_LT(result.history.back().train_loss, std::log(4.0));
}

TEST(Determinism, SameSeedGivesByteIdenticalHistoryAndCheckpoint) {
  const auto corpus = small_corpus(20, 8);
  const std::vector<AnnotatedSentence> train_set(corpus.begin(), corpus.begin() + 14);
  const std::vector<AnnotatedSentence> val_set(corpus.begin() + 14, corpus.end());
  const auto vocab = build_vocab(corpus);
  const auto config = quick_config(vocab);
  std::string history[2], weights[2], manifest[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = scratch("det" + std::to_string(run));
    Model<double> model(config.model, config.seed);
    const auto result = train(model, vocab, config, train_set, val_set);
    save_checkpoint(dir, model, vocab, config);
    history[run] = history_csv(result.history);
    weights[run] = slurp(dir / "weights.bin");
    manifest[run] = slurp(dir / "manifest.json");
    fs::remove_all(dir);
  }
  EXPECT_EQ(history[0], history[1]);
  EXPECT_EQ(weights[0], weights[1]);
  EXPECT_EQ(manifest[0], manifest[1]);
  EXPECT_NE(history[0].find(",0.000\n"), std::string::npos);  // timing disabled
}

TEST(Checkpoint, RoundTripReproducesLogits) {
  const auto corpus = small_corpus(6, 1);
  const auto vocab = build_vocab(corpus);
  const auto config = quick_config(vocab);
  Model<double> model(config.model, 77);
  const auto dir = scratch("roundtrip");
  save_checkpoint(dir, model, vocab, config);
  EXPECT_FALSE(fs::exists(dir / "weights.bin.tmp"));
  auto loaded = load_checkpoint<double>(dir);
  EXPECT_EQ(loaded.vocab, vocab);
  EXPECT_EQ(loaded.config.model.dim, config.model.dim);
  EXPECT_EQ(read_checkpoint_config(dir).seed, config.seed);
  const auto batch = make_batch(corpus, vocab, vocab.max_len());
  const auto a = model.forward(batch).logits, b = loaded.model.forward(batch).logits;
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.values()[i], b.values()[i]);

  auto as_float = load_checkpoint<float>(dir);
  EXPECT_FLOAT_EQ(as_float.model.parameters()[0].second.values()[0],
                  static_cast<float>(model.parameters()[0].second.values()[0]));
  fs::remove_all(dir);
}

TEST(Checkpoint, ShapeMismatchNamesTheTensor) {
  const auto corpus = small_corpus(6, 1);
  const auto vocab = build_vocab(corpus);
  const auto config = quick_config(vocab);
  Model<double> model(config.model, 77);
  const auto dir = scratch("mismatch");
  save_checkpoint(dir, model, vocab, config);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  manifest["tensors"][3]["shape"] = {1, 2};
  const auto name = manifest["tensors"][3]["name"].get<std::string>();
  std::ofstream(dir / "manifest.json") << manifest.dump();
  try {
    load_checkpoint<double>(dir);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
  }

  manifest["tensors"].erase(3);
  std::ofstream(dir / "manifest.json") << manifest.dump();
  EXPECT_THROW(load_checkpoint<double>(dir), CheckpointError);
  manifest["format"] = "other";
  std::ofstream(dir / "manifest.json") << manifest.dump();
  EXPECT_THROW(load_checkpoint<double>(dir), CheckpointError);
  EXPECT_THROW(load_checkpoint<double>(dir / "absent"), CheckpointError);
  fs::remove_all(dir);
}

TEST(GradCheck, FullModelOnFiveTokenSentence) {
  const auto report = model_gradcheck(fixture::small_config(16, 1), vitamin_d_example(), 3, 1e-4);
  EXPECT_TRUE(report.pass) << report.max_rel_error;
  EXPECT_GT(report.entries.size(), 20u);
}
