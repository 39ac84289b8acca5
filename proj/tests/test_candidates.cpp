#include <gtest/gtest.h>

#include <algorithm>

#include "petal/candidates.hpp"
#include "petal/synth.hpp"
#include "test_util.hpp"

using namespace petal;
using petal::testing::make_matrix;
using petal::testing::random_matrix;

namespace {

VocabTable vocab_of(const std::vector<std::string>& surfaces, bool word_initial = true) {
  VocabTable v;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    v.entries.push_back(VocabEntry{surfaces[i], surfaces.size() - i, word_initial});
  }
  return v;
}

std::vector<TokenId> all_tokens(std::size_t n) {
  std::vector<TokenId> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<TokenId>(i);
  return t;
}

}  // namespace

TEST(WordPredicate, KeepsAlphabeticWords) {
  EXPECT_EQ(filter_vocab(vocab_of({" health", "x7", "ab"})), (std::vector<TokenId>{0, 2}));
}

TEST(WordPredicate, RejectsContinuationsAndShortTokens) {
  VocabTable v = vocab_of({"ing", "a", " b", "", "  "});
  v.entries[0].word_initial = false;
  EXPECT_TRUE(filter_vocab(v).empty());
}

TEST(WordPredicate, NonAlphaModeStillNeedsTwoLetters) {
  const VocabTable v = vocab_of({"a1b", "x7", "ab-c", "42"});
  EXPECT_EQ(filter_vocab(v, 10, WordPredicate{false}), (std::vector<TokenId>{0, 2}));
  EXPECT_TRUE(filter_vocab(v, 10, WordPredicate{true}).empty());
}

TEST(WordPredicate, AcceptsNonAsciiLetters) {
  EXPECT_EQ(filter_vocab(vocab_of({"\xC3\xA9t\xC3\xA9", "\xD0\xB4\xD0\xB0", "a\xC3\x97" "b"})),
            (std::vector<TokenId>{0, 1}));
}

TEST(FilterVocab, KeepsMostFrequent) {
  const auto t_f = filter_vocab(gen_vocab(20000));
  ASSERT_EQ(t_f.size(), 10000u);
  EXPECT_EQ(t_f, all_tokens(10000));
}

TEST(FilterVocab, FrequencyTiesGoToLowerIds) {
  VocabTable v = gen_vocab(10);
  for (auto& e : v.entries) e.frequency = 7;
  EXPECT_EQ(filter_vocab(v, 4), (std::vector<TokenId>{0, 1, 2, 3}));
}

TEST(FilterVocab, ResultIsAscendingAndMonotoneInFrequency) {
  VocabTable v = gen_vocab(500);
  Lcg64 rng(3);
  for (auto& e : v.entries) e.frequency = rng.below(50);
  const auto t_f = filter_vocab(v, 100);
  ASSERT_EQ(t_f.size(), 100u);
  EXPECT_TRUE(std::is_sorted(t_f.begin(), t_f.end()));
  std::uint64_t weakest_kept = UINT64_MAX;
  for (TokenId t : t_f) weakest_kept = std::min(weakest_kept, v[t].frequency);
  for (TokenId t = 0; t < 500; ++t) {
    if (!std::binary_search(t_f.begin(), t_f.end(), t)) {
      EXPECT_LE(v[t].frequency, weakest_kept);
    }
  }
}

TEST(LabelCandidates, DominantTokenComesFirst) {
  const LogitMatrix m = make_matrix({{0.0f, 9.0f, 0.0f, 1.0f}, {0.0f, 0.0f, 0.0f, 0.0f}});
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1}), 0);
  const auto c = label_candidates(m, bv, all_tokens(4), 2);
  EXPECT_EQ(c, (std::vector<TokenId>{1, 3}));
}

TEST(LabelCandidates, UnderfullPoolReturnsEverything) {
  const LogitMatrix m = random_matrix(4, 30, 1);
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1, 0, 1}), 0);
  const std::vector<TokenId> t_f = {2, 5, 7, 11, 29};
  auto c = label_candidates(m, bv, t_f, 1000);
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, t_f);
}

TEST(LabelCandidates, IgnoresNegativeRows) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LogitMatrix m = random_matrix(6, 200, seed);
    const LabeledExamples data(2, {0, 1, 0, 1, 0, 1});
    const BinaryView bv = BinaryView::make(data, 0);
    const auto before = label_candidates(m, bv, all_tokens(200), 20);
    Lcg64 rng(seed + 100);
    for (std::size_t i : bv.negatives) {
      for (std::size_t t = 0; t < 200; ++t) m.scores[i * 200 + t] = static_cast<float>(10.0 * rng.normal());
    }
    EXPECT_EQ(label_candidates(m, bv, all_tokens(200), 20), before);
  }
}

TEST(LabelCandidates, SymmetricPatternsTieToLowerId) {
  const LogitMatrix a = make_matrix({{5.0f, 3.0f, 0.0f}});
  const LogitMatrix b = make_matrix({{3.0f, 5.0f, 0.0f}});
  const std::vector<NormalizedScores> scores = {NormalizedScores(a), NormalizedScores(b)};
  const BinaryView bv = BinaryView::make(LabeledExamples(1, {0}), 0);
  EXPECT_EQ(label_candidates(scores, bv, all_tokens(3), 2), (std::vector<TokenId>{0, 1}));
}

TEST(LabelCandidates, PerPatternPoolingKeepsEachPatternsFavorite) {
  // Token 2 is the best in the second pattern only; summed scores prefer 1.
  const LogitMatrix a = make_matrix({{9.0f, 8.0f, -20.0f, 0.0f}});
  const LogitMatrix b = make_matrix({{0.0f, 6.0f, 7.0f, 0.0f}});
  const std::vector<NormalizedScores> scores = {NormalizedScores(a), NormalizedScores(b)};
  const BinaryView bv = BinaryView::make(LabeledExamples(1, {0}), 0);
  EXPECT_EQ(label_candidates(scores, bv, all_tokens(4), 2, CandidatePooling::Summed),
            (std::vector<TokenId>{1, 0}));
  EXPECT_EQ(label_candidates(scores, bv, all_tokens(4), 2, CandidatePooling::PerPattern),
            (std::vector<TokenId>{0, 2}));
}

TEST(LabelCandidates, ThreadCountDoesNotChangeResult) {
  const LogitMatrix m = random_matrix(10, 3000, 8);
  const NormalizedScores one(m, 1);
  const NormalizedScores four(m, 4);
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1}), 1);
  const auto t_f = all_tokens(3000);
  for (auto pooling : {CandidatePooling::Summed, CandidatePooling::PerPattern}) {
    EXPECT_EQ(label_candidates(std::span<const NormalizedScores>(&one, 1), bv, t_f, 50, pooling, 1),
              label_candidates(std::span<const NormalizedScores>(&four, 1), bv, t_f, 50, pooling, 4));
  }
}

TEST(LabelCandidates, RejectsEmptyInputs) {
  const LogitMatrix m = random_matrix(2, 5, 0);
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1}), 0);
  EXPECT_THROW(label_candidates(m, bv, std::vector<TokenId>{}), Error);
  const BinaryView none = BinaryView::make(LabeledExamples(3, {0, 1}), 2);
  EXPECT_THROW(label_candidates(m, none, all_tokens(5)), Error);
}

TEST(BuildCandidateSets, OnePoolPerLabel) {
  const Fixture f = gen_planted(petal::testing::planted_spec(3, 400, 2));
  const NormalizedScores s(f.matrix);
  const auto sets = build_candidate_sets(std::span<const NormalizedScores>(&s, 1), f.data, all_tokens(400), 25);
  ASSERT_EQ(sets.per_label.size(), 3u);
  for (const auto& pool : sets.per_label) EXPECT_EQ(pool.size(), 25u);
}
