#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace depcause;
using depcause::fixture::data_path;

TEST(Conllu, VitaminFixtureMatchesHandAnnotation) {
  const auto r = read_conllu_file(data_path("vitamin_d.conllu"));
  ASSERT_EQ(r.sentences.size(), 1u);
  EXPECT_EQ(r.sentences[0], vitamin_d_example());
  EXPECT_EQ(r.skipped, 0u);
}

TEST(Conllu, SkipsMultiwordRangesAndEmptyNodes) {
  const std::string text =
      "# cause = 0..0\n# effect = 2..2\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tSmoke\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
      "2\tharms\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "2.1\tghost\t_\tNOUN\t_\t_\t_\t_\t_\t_\n"
      "3\tlungs\t_\tNOUN\t_\t_\t2\tobj\t_\t_\n\n";
  const auto r = parse_conllu_text(text);
  ASSERT_EQ(r.sentences.size(), 1u);
  ASSERT_EQ(r.sentences[0].size(), 3u);
  EXPECT_EQ(r.sentences[0].tokens[2].form, "lungs");
  EXPECT_EQ(r.sentences[0].tokens[2].head, 1);
  EXPECT_EQ(r.sentences[0].id, "conllu-1");
}

TEST(Conllu, BlocksWithoutSpansAreCountedAndSkipped) {
  const std::string text =
      "1\tRain\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n"
      "# cause = 0..0\n# effect = 1..1\n"
      "1\tRain\t_\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "2\tfloods\t_\tNOUN\t_\t_\t1\tdep\t_\t_\n";
  const auto r = parse_conllu_text(text);
  EXPECT_EQ(r.sentences.size(), 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(parse_conllu_text(text, false).sentences.size(), 2u);
}

TEST(Conllu, WrongColumnCountReportsLine) {
  const std::string text = "# cause = 0..0\n# effect = 0..0\n1\tRain\tNOUN\n";
  try {
    parse_conllu_text(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Conllu, BadSpanAndBadHead) {
  EXPECT_THROW(parse_conllu_text("# cause = x\n"), ParseError);
  EXPECT_THROW(parse_conllu_text("# cause = 0..0\n# effect = 0..0\n1\tA\t_\tNOUN\t_\t_\tq\tdep\t_\t_\n"),
               ParseError);
}

TEST(Conllu, InvalidTreeIsAValidationError) {
  const std::string text =
      "# cause = 0..0\n# effect = 1..1\n"
      "1\tA\t_\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "2\tB\t_\tNOUN\t_\t_\t0\troot\t_\t_\n";
  EXPECT_THROW(parse_conllu_text(text), ValidationError);
}

TEST(Conllu, WriteThenReadIsIdentity) {
  const auto corpus = read_conllu_file(data_path("corpus50.conllu")).sentences;
  std::ostringstream os;
  write_conllu(os, corpus);
  EXPECT_EQ(parse_conllu_text(os.str()).sentences, corpus);
}

TEST(Jsonl, KeyOrderIsStable) {
  const auto line = sentence_to_json(vitamin_d_example()).dump();
  EXPECT_EQ(line.rfind("{\"id\":\"vitamin-d\",\"tokens\":[", 0), 0u);
  EXPECT_NE(line.find("\"cause\":[0,2],\"effect\":[4,4]}"), std::string::npos);
}

TEST(Jsonl, RoundTrip) {
  std::ostringstream os;
  write_jsonl(os, {vitamin_d_example()});
  std::istringstream in(os.str());
  const auto back = read_jsonl(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], vitamin_d_example());
}

TEST(Jsonl, SchemaErrorsNameTheField) {
  auto j = nlohmann::json::parse(sentence_to_json(vitamin_d_example()).dump());
  auto expect_field = [](const nlohmann::json& record, const std::string& field) {
    try {
      sentence_from_json(record, 4);
      FAIL() << "expected SchemaError for " << field;
    } catch (const SchemaError& e) {
      EXPECT_EQ(e.field(), field);
      EXPECT_EQ(e.line(), 4u);
    }
  };
  auto missing = j;
  missing.erase("pos_tags");
  expect_field(missing, "pos_tags");
  auto short_heads = j;
  short_heads["heads"].erase(0);
  expect_field(short_heads, "heads");
  auto bad_span = j;
  bad_span["cause"] = {1};
  expect_field(bad_span, "cause");
  auto bad_token = j;
  bad_token["tokens"][0] = 5;
  expect_field(bad_token, "tokens");
}

TEST(Jsonl, MalformedLineIsParseError) {
  std::istringstream in("\n{not json}\n");
  try {
    read_jsonl(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Files, AtomicWriteAndDispatchByExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "depcause_io_test";
  std::filesystem::create_directories(dir);
  write_jsonl_file(dir / "c.jsonl", {vitamin_d_example()});
  EXPECT_FALSE(std::filesystem::exists(dir / "c.jsonl.tmp"));
  EXPECT_EQ(read_corpus_file(dir / "c.jsonl").sentences[0], vitamin_d_example());
  EXPECT_EQ(read_corpus_file(data_path("vitamin_d.conllu")).sentences[0], vitamin_d_example());
  EXPECT_THROW(read_corpus_file(dir / "missing.jsonl"), Error);
  std::filesystem::remove_all(dir);
}

// The round trip that the acceptance suite also checks, kept here for the
// unit suite: CoNLL-U -> internal -> JSONL -> internal.
TEST(RoundTrip, FiftySentenceFixture) {
  const auto corpus = read_conllu_file(data_path("corpus50.conllu")).sentences;
  ASSERT_EQ(corpus.size(), 50u);
  std::ostringstream os;
  write_jsonl(os, corpus);
  std::istringstream in(os.str());
  const auto back = read_jsonl(in);
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) EXPECT_EQ(back[i], corpus[i]) << corpus[i].id;
}
