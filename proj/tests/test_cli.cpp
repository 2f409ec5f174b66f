#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "depcause/cli.hpp"
#include "test_support.hpp"

using namespace depcause;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, log;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "depcause");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, log;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, log);
  return {code, out.str(), log.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("depcause_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("DEPCAUSE_SEED");
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenDataSplitsAndIsReproducible) {
  auto r = invoke({"gen-data", "--n", "2000", "--seed", "7", "--out", path("a")});
  ASSERT_EQ(r.code, 0) << r.log;
  EXPECT_NE(r.log.find("[depcause] generated 2000"), std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(path("a/manifest.json")));
  EXPECT_EQ(manifest["files"]["train"]["sentences"], 1200);
  EXPECT_EQ(manifest["files"]["test"]["sentences"], 600);
  EXPECT_EQ(manifest["files"]["validation"]["sentences"], 200);
  EXPECT_EQ(read_jsonl_file(path("a/train.jsonl")).size(), 1200u);

  ASSERT_EQ(invoke({"gen-data", "--n", "2000", "--seed", "7", "--out", path("b")}).code, 0);
  for (const char* f : {"train.jsonl", "test.jsonl", "validation.jsonl", "manifest.json"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  }
}

TEST_F(CliTest, GenDataSeedFromEnvironmentAndConllu) {
  setenv("DEPCAUSE_SEED", "7", 1);
  ASSERT_EQ(invoke({"gen-data", "--n", "50", "--out", path("env"), "--format", "conllu"}).code, 0);
  unsetenv("DEPCAUSE_SEED");
  ASSERT_EQ(invoke({"gen-data", "--n", "50", "--seed", "7", "--out", path("flag"), "--format", "conllu"}).code, 0);
  EXPECT_EQ(slurp(path("env/train.conllu")), slurp(path("flag/train.conllu")));
  EXPECT_EQ(read_conllu_file(path("env/train.conllu")).sentences.size(), 30u);
  setenv("DEPCAUSE_SEED", "seven", 1);
  EXPECT_EQ(invoke({"gen-data", "--n", "5", "--out", path("bad")}).code, 2);
  unsetenv("DEPCAUSE_SEED");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  auto r = invoke({"gen-data", "--n", "100000", "--out", path("x")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.log.find("at most"), std::string::npos) << r.log;
  EXPECT_EQ(invoke({"train", "--train", path("missing.jsonl"), "--out-dir", path("o")}).code, 2);
  EXPECT_EQ(invoke({"gen-data", "--n", "5", "--out", path("x"), "--bogus"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"gen-data", "--n", "5", "--out", path("x"), "--split", "1:2"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, GradcheckPasses) {
  auto r = invoke({"gradcheck", "--seed", "1"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("overall: PASS"), std::string::npos);
  // An impossible tolerance is a verification failure, not a usage error.
  EXPECT_EQ(invoke({"gradcheck", "--tolerance", "1e-30"}).code, 1);
}

TEST_F(CliTest, ValidateReportsViolations) {
  auto good = generate(default_templates(), default_lexicon(), 10, 1).sentences;
  write_jsonl_file(path("good.jsonl"), good);
  auto bad = good;
  bad[2].effect = bad[2].cause;
  write_jsonl_file(path("bad.jsonl"), bad);
  auto r = invoke({"validate", "--data", path("good.jsonl")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("10 sentences, 0 tree, 0 span, 0 pos violations"), std::string::npos) << r.out;
  r = invoke({"validate", "--data", path("good.jsonl"), "--data", path("bad.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("gen-000002: spans"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainEvalPredictInspect) {
  ASSERT_EQ(invoke({"gen-data", "--n", "40", "--seed", "3", "--out", path("data")}).code, 0);
  auto r = invoke({"train", "--train", path("data/train.jsonl"), "--val", path("data/validation.jsonl"),
                   "--out-dir", path("model"), "--dim", "16", "--layers-left", "1", "--layers-right", "1",
                   "--max-epochs", "3", "--tolerance", "2", "--batch-size", "8", "--seed", "4", "--no-timing",
                   "--set", "clip_norm=5"});
  ASSERT_EQ(r.code, 0) << r.log;
  EXPECT_NE(r.out.find("final train loss: "), std::string::npos);
  EXPECT_NE(r.out.find("train exact match: "), std::string::npos);
  EXPECT_NE(r.log.find("[depcause] epoch 1"), std::string::npos);
  for (const char* f : {"manifest.json", "weights.bin", "vocab.json", "history.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(path(std::string("model/") + f))) << f;
  }
  const auto config = nlohmann::json::parse(slurp(path("model/config.json")));
  EXPECT_EQ(config["clip_norm"], 5.0);
  EXPECT_EQ(config["dim"], 16);

  r = invoke({"eval", "--checkpoint", path("model"), "--data", path("data/test.jsonl"), "--json",
              "--per-sentence", path("per.jsonl"), "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.log;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_TRUE(report.contains("exact_match"));
  EXPECT_TRUE(report.contains("loss"));
  std::ifstream per(path("per.jsonl"));
  std::size_t lines = 0;
  for (std::string line; std::getline(per, line);) {
    EXPECT_TRUE(nlohmann::json::parse(line).contains("exact_match"));
    ++lines;
  }
  EXPECT_EQ(lines, 12u);

  r = invoke({"predict", "--checkpoint", path("model"), "--data", path("data/test.jsonl")});
  ASSERT_EQ(r.code, 0) << r.log;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 12);

  // Unlabelled CoNLL-U input: no span comments needed.
  std::ofstream(path("raw.conllu")) << "1\tSmoking\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
                                       "2\tcauses\t_\tVERB\t_\t_\t0\tROOT\t_\t_\n"
                                       "3\tcancer\t_\tNOUN\t_\t_\t2\tdobj\t_\t_\n";
  r = invoke({"predict", "--checkpoint", path("model"), "--text-with-annotations", path("raw.conllu")});
  ASSERT_EQ(r.code, 0) << r.log;
  const auto pred = nlohmann::json::parse(r.out);
  EXPECT_EQ(pred["labels"].size(), 3u);
  EXPECT_FALSE(pred.contains("exact_match"));
  EXPECT_EQ(invoke({"predict", "--checkpoint", path("model"), "--data", path("data/test.jsonl"),
                    "--text-with-annotations", path("raw.conllu")}).code,
            2);

  r = invoke({"inspect-attention", "--checkpoint", path("model"), "--layer", "0"});
  ASSERT_EQ(r.code, 0) << r.log;
  const auto att = nlohmann::json::parse(r.out);
  const auto& alpha = att["alpha"];
  const auto& adj = att["adjacency"];
  ASSERT_EQ(alpha.size(), 7u);  // [START] + 5 tokens + [END]
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double row = 0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      const double a = alpha[i][k].get<double>();
      if (adj[i][k] == 0) {
        EXPECT_EQ(a, 0.0) << i << "," << k;
      }
      row += a;
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
  EXPECT_EQ(invoke({"inspect-attention", "--checkpoint", path("model"), "--layer", "5"}).code, 2);
  EXPECT_EQ(invoke({"inspect-attention", "--checkpoint", path("model"), "--sentence-id", "nope"}).code, 2);
  EXPECT_EQ(invoke({"eval", "--checkpoint", path("nowhere"), "--data", path("data/test.jsonl")}).code, 2);
}

TEST_F(CliTest, TrainRejectsInvalidConfig) {
  ASSERT_EQ(invoke({"gen-data", "--n", "20", "--seed", "3", "--out", path("data")}).code, 0);
  std::ofstream(path("cfg.json")) << R"({"dim": 30, "heads": 4})";
  auto r = invoke({"train", "--train", path("data/train.jsonl"), "--out-dir", path("m"), "--config", path("cfg.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.log.find("divisible"), std::string::npos) << r.log;
  EXPECT_EQ(invoke({"train", "--train", path("data/train.jsonl"), "--out-dir", path("m"), "--set", "nonsense=1"}).code, 2);
  EXPECT_EQ(invoke({"train", "--train", path("data/train.jsonl"), "--out-dir", path("m"), "--max-epochs", "5"}).code, 2);
}
