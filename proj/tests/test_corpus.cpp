#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace depcause;

namespace {

std::vector<int> as_ints(const LabelSequence& labels) {
  std::vector<int> out;
  for (auto c : labels) out.push_back(static_cast<int>(c));
  return out;
}

}  // namespace

TEST(Labels, VitaminExampleAtLengthEight) {
  const auto labels = label_sequence(vitamin_d_example(), 8);
  EXPECT_EQ(as_ints(labels), (std::vector<int>{1, 2, 2, 2, 4, 3, 1, 1}));
}

TEST(Labels, TooShortPaddingIsRejected) {
  EXPECT_THROW(label_sequence(vitamin_d_example(), 6), PreconditionError);
}

TEST(Labels, ExactFitHasNoPads) {
  const auto labels = label_sequence(vitamin_d_example(), 7);
  EXPECT_EQ(as_ints(labels), (std::vector<int>{1, 2, 2, 2, 4, 3, 1}));
}

TEST(Adjacency, VitaminExampleEdges) {
  const auto adj = build_adjacency(vitamin_d_example(), 8);
  // Padded positions: 1 Vitamin, 2 D, 3 deficiency, 4 causes, 5 diabetes.
  const std::set<std::pair<std::size_t, std::size_t>> edges = {{1, 2}, {2, 3}, {3, 4}, {4, 5}};
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t k = 0; k < 8; ++k) {
      const bool expected = i == k || edges.count({i, k}) || edges.count({k, i});
      EXPECT_EQ(adj(i, k), expected) << i << "," << k;
    }
  }
  EXPECT_EQ(adj.edge_count(), 8u);
  EXPECT_TRUE(adj.symmetric());
}

TEST(Adjacency, WithoutSelfLoopsSpecialsStillAttendToThemselves) {
  const auto adj = build_adjacency(vitamin_d_example(), 8, {false, false});
  EXPECT_TRUE(adj(0, 0));
  EXPECT_TRUE(adj(6, 6));
  EXPECT_TRUE(adj(7, 7));
  EXPECT_FALSE(adj(3, 3));
  EXPECT_EQ(adj.neighbors(1), (std::vector<std::size_t>{2}));
}

TEST(Adjacency, DirectedKeepsDependentToHead) {
  const auto adj = build_adjacency(vitamin_d_example(), 8, {true, true});
  EXPECT_TRUE(adj(1, 2));   // Vitamin -> D
  EXPECT_FALSE(adj(2, 1));
  EXPECT_TRUE(adj(5, 4));   // diabetes -> causes
  EXPECT_FALSE(adj.symmetric());
}

TEST(Adjacency, SpecialsHaveNoDependencyEdges) {
  const auto adj = build_adjacency(vitamin_d_example(), 8);
  for (std::size_t p : {0u, 6u, 7u}) EXPECT_EQ(adj.neighbors(p), (std::vector<std::size_t>{p}));
}

TEST(Adjacency, PropertyTreeHasNMinusOneEdges) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(11);
    const auto s = fixture::random_tree_sentence(rng, n);
    const auto adj = build_adjacency(s, n + 2 + rng.index(3));
    EXPECT_EQ(adj.edge_count(), 2 * (n - 1));
    EXPECT_TRUE(adj.symmetric());
  }
}

TEST(Validation, TreeProblems) {
  auto s = vitamin_d_example();
  EXPECT_FALSE(tree_problem(s));
  s.tokens[4].head = kRootHead;  // two roots
  EXPECT_TRUE(tree_problem(s));
  s = vitamin_d_example();
  s.tokens[3].head = 2;  // 2 -> 3 -> 2 cycle, no root
  EXPECT_TRUE(tree_problem(s));
  s = vitamin_d_example();
  s.tokens[0].head = 9;  // out of range
  EXPECT_TRUE(tree_problem(s));
  s = vitamin_d_example();
  s.tokens[0].head = 0;  // self head
  EXPECT_TRUE(tree_problem(s));
  EXPECT_THROW(build_adjacency(s, 8), ValidationError);
}

TEST(Validation, SpanProblems) {
  auto s = vitamin_d_example();
  EXPECT_FALSE(span_problem(s));
  s.effect = Span{2, 4};
  EXPECT_TRUE(span_problem(s));  // overlaps cause
  s.effect = Span{4, 5};
  EXPECT_TRUE(span_problem(s));  // past the end
  s.effect = Span{4, 3};
  EXPECT_TRUE(span_problem(s));
  EXPECT_THROW(label_sequence(s, 8), ValidationError);
}

TEST(Validation, PosProblems) {
  auto s = vitamin_d_example();
  EXPECT_FALSE(pos_problem(s));
  s.tokens[2].pos = "_";
  EXPECT_TRUE(pos_problem(s));
}

TEST(Split, SixThreeOneOnTwoThousand) {
  std::vector<AnnotatedSentence> all(2000, vitamin_d_example());
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = std::to_string(i);
  const auto split = split_dataset(all, parse_split_ratios("6:3:1"), 7);
  EXPECT_EQ(split.train.size(), 1200u);
  EXPECT_EQ(split.test.size(), 600u);
  EXPECT_EQ(split.validation.size(), 200u);
  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.test, &split.validation})
    for (const auto& s : *part) ids.insert(s.id);
  EXPECT_EQ(ids.size(), 2000u);
}

TEST(Split, RoundingGivesRemainderToTrain) {
  std::vector<AnnotatedSentence> all(7, vitamin_d_example());
  const auto split = split_dataset(all, {0.6, 0.3, 0.1}, 1);
  EXPECT_EQ(split.test.size(), 2u);
  EXPECT_EQ(split.validation.size(), 0u);
  EXPECT_EQ(split.train.size(), 5u);
  EXPECT_FALSE(split.warnings.empty());
}

TEST(Split, SeededAndDeterministic) {
  std::vector<AnnotatedSentence> all(50, vitamin_d_example());
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = std::to_string(i);
  EXPECT_EQ(split_dataset(all, {0.6, 0.3, 0.1}, 4).test, split_dataset(all, {0.6, 0.3, 0.1}, 4).test);
  EXPECT_NE(split_dataset(all, {0.6, 0.3, 0.1}, 4).test, split_dataset(all, {0.6, 0.3, 0.1}, 5).test);
}

TEST(Split, BadRatios) {
  EXPECT_THROW(parse_split_ratios("6:3"), PreconditionError);
  EXPECT_THROW(parse_split_ratios("6:3:1:1"), PreconditionError);
  EXPECT_THROW(parse_split_ratios("a:3:1"), PreconditionError);
  EXPECT_THROW(parse_split_ratios("0:0:0"), PreconditionError);
  EXPECT_THROW(split_dataset({vitamin_d_example()}, {0.5, 0.2, 0.2}, 0), PreconditionError);
  EXPECT_THROW(split_dataset({}, {0.6, 0.3, 0.1}, 0), PreconditionError);
  const auto r = parse_split_ratios("60:30:10");
  EXPECT_DOUBLE_EQ(r[0], 0.6);
}
