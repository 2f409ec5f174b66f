#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace depcause;

using fixture::from_classes;

TEST(Metrics, AgreeWithBruteForceRecount) {
  Rng rng(21);
  for (int corpus = 0; corpus < 50; ++corpus) {
    std::vector<AnnotatedSentence> golds;
    std::vector<Prediction> preds;
    const std::size_t n = 1 + rng.index(20);
    for (std::size_t s = 0; s < n; ++s) {
      golds.push_back(fixture::random_tree_sentence(rng, 2 + rng.index(10)));
      const auto labels = label_sequence(golds.back(), golds.back().size() + 2);
      std::vector<TokenClass> classes;
      for (std::size_t i = 0; i < golds.back().size(); ++i) {
        // Mostly correct so exact matches occur, with random corruption.
        const auto truth = labels[i + 1];
        classes.push_back(rng.bernoulli(0.85) ? truth : static_cast<TokenClass>(2 + rng.index(3)));
      }
      preds.push_back(from_classes(classes));
    }
    const auto report = token_prf(preds, golds);
    const auto oracle = fixture::recount(preds, golds);
    EXPECT_NEAR(report.micro.precision, oracle.precision, 1e-12);
    EXPECT_NEAR(report.micro.recall, oracle.recall, 1e-12);
    EXPECT_NEAR(report.micro.f1, oracle.f1, 1e-12);
    EXPECT_NEAR(report.exact_match, oracle.exact, 1e-12);
    for (std::size_t s = 0; s < n; ++s) {
      EXPECT_EQ(exact_match(preds[s], golds[s]),
                fixture::recount({preds[s]}, {golds[s]}).exact == 1.0);
    }
  }
}

TEST(Metrics, MissedEffectTokenIsNotAnExactMatch) {
  const auto gold = vitamin_d_example();
  using C = TokenClass;
  const auto perfect = from_classes({C::kCause, C::kCause, C::kCause, C::kOther, C::kEffect});
  const auto missed = from_classes({C::kCause, C::kCause, C::kCause, C::kOther, C::kOther});
  EXPECT_TRUE(exact_match(perfect, gold));
  EXPECT_FALSE(exact_match(missed, gold));
  const auto r = token_prf({missed}, {gold});
  EXPECT_EQ(r.exact_match, 0.0);
  EXPECT_EQ(r.micro.tp, 3u);
  EXPECT_EQ(r.micro.fn, 1u);
  EXPECT_DOUBLE_EQ(r.micro.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.micro.recall, 0.75);
  EXPECT_DOUBLE_EQ(r.micro.f1, 2 * 0.75 / 1.75);
  EXPECT_DOUBLE_EQ(r.effect.recall, 0.0);
  EXPECT_TRUE(r.zero_division);  // no effect predictions at all
}

TEST(Metrics, ExtraTokenBreaksExactMatch) {
  using C = TokenClass;
  const auto extra = from_classes({C::kCause, C::kCause, C::kCause, C::kCause, C::kEffect});
  EXPECT_FALSE(exact_match(extra, vitamin_d_example()));
}

TEST(Metrics, LengthMismatchIsRejected) {
  using C = TokenClass;
  EXPECT_THROW(token_prf({from_classes({C::kCause})}, {vitamin_d_example()}), DimensionError);
  EXPECT_THROW(token_prf({}, {vitamin_d_example()}), DimensionError);
}

TEST(Decode, TiesGoToLowestClassAndSpecialBecomesOther) {
  // Rows: [START], tok0, tok1, tok2, [END]
  const std::vector<double> logits = {
      9, 0, 0, 0,  //
      0, 1, 1, 0,  // tie Cause/Effect -> Cause
      7, 0, 0, 0,  // Special -> Other
      0, 0, 2, 2,  // tie Effect/Other -> Effect
      9, 0, 0, 0};
  const auto p = decode_rows<double>(logits, 0, 3);
  EXPECT_EQ(p.classes, (std::vector<TokenClass>{TokenClass::kCause, TokenClass::kOther, TokenClass::kEffect}));
  EXPECT_EQ(p.cause_tokens, (std::vector<std::size_t>{0}));
  EXPECT_EQ(p.effect_tokens, (std::vector<std::size_t>{2}));
}

TEST(Decode, RunsAndJson) {
  EXPECT_EQ(contiguous_runs({0, 1, 2, 5, 7, 8}), (std::vector<Span>{{0, 2}, {5, 5}, {7, 8}}));
  using C = TokenClass;
  const auto p = from_classes({C::kCause, C::kCause, C::kCause, C::kOther, C::kEffect});
  const auto j = prediction_to_json(p, vitamin_d_example(), true);
  EXPECT_EQ(j.dump(),
            R"({"id":"vitamin-d","tokens":["Vitamin","D","deficiency","causes","diabetes"],)"
            R"("labels":[2,2,2,4,3],"cause_tokens":[0,1,2],"effect_tokens":[4],)"
            R"("cause_spans":[[0,2]],"effect_spans":[[4,4]],"exact_match":true})");
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const auto corpus = generate(default_templates(), default_lexicon(), 40, 6).sentences;
  const auto vocab = build_vocab(corpus);
  Model<double> model(sized_for(fixture::small_config(), vocab), 2);
  const auto one = evaluate(model, vocab, corpus, 8, true, 1);
  const auto four = evaluate(model, vocab, corpus, 8, true, 4);
  EXPECT_EQ(one.loss, four.loss);
  EXPECT_EQ(one.report.to_json().dump(), four.report.to_json().dump());
  ASSERT_EQ(one.predictions.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(one.predictions[i].classes, four.predictions[i].classes);
  }
  // Batching does not change the loss either.
  EXPECT_NEAR(evaluate(model, vocab, corpus, 64).loss, one.loss, 1e-12);
  // Untrained: uniform logits everywhere, loss exactly ln 4.
  EXPECT_NEAR(one.loss, std::log(4.0), 1e-12);
}

TEST(Evaluate, PredictMatchesBatchedDecode) {
  const auto corpus = generate(default_templates(), default_lexicon(), 10, 6).sentences;
  const auto vocab = build_vocab(corpus);
  auto config = sized_for(fixture::small_config(), vocab);
  Model<double> model(config, 4);
  // Perturb the zero-initialized output layer so predictions are not all ties.
  Rng rng(1);
  for (auto& w : model.classifier().w.mutable_values()) w = rng.normal();
  const auto batched = evaluate(model, vocab, corpus, 4).predictions;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(predict(model, vocab, corpus[i]).classes, batched[i].classes);
  }
}

TEST(Report, PrintsTable) {
  using C = TokenClass;
  const auto r = token_prf({from_classes({C::kCause, C::kCause, C::kCause, C::kOther, C::kEffect})},
                           {vitamin_d_example()});
  std::ostringstream os;
  r.print(os);
  EXPECT_NE(os.str().find("exact match: 1.0000 (1/1)"), std::string::npos) << os.str();
  EXPECT_EQ(r.to_json()["f1"], 1.0);
}
