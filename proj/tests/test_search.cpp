#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "naive_oracle.hpp"
#include "petal/search.hpp"
#include "petal/synth.hpp"
#include "test_util.hpp"

using namespace petal;
using petal::testing::make_matrix;
using petal::testing::planted_spec;
using petal::testing::random_matrix;
using petal::testing::uniform_matrix;

namespace {

std::vector<TokenId> all_tokens(std::size_t n) {
  std::vector<TokenId> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<TokenId>(i);
  return t;
}

std::vector<TokenId> tokens_of(const std::vector<TokenLoss>& list) {
  std::vector<TokenId> out;
  for (const auto& tl : list) out.push_back(tl.token);
  return out;
}

}  // namespace

TEST(RankLabelTokens, PlantedTokenRanksFirst) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PlantedSpec spec = planted_spec(2, 2000, seed);
    const Fixture f = gen_planted(spec);
    const NormalizedScores s(f.matrix);
    for (Label y = 0; y < 2; ++y) {
      const auto ranked = rank_label_tokens(std::span<const NormalizedScores>(&s, 1), BinaryView::make(f.data, y),
                                            all_tokens(2000));
      EXPECT_EQ(ranked.front().token, spec.planted[y]);
      EXPECT_TRUE(std::is_sorted(ranked.begin(), ranked.end(), ranks_before));
    }
  }
}

TEST(RankLabelTokens, CrossEntropyFavorsConfounder) {
  const PlantedSpec spec = planted_spec(2, 2000, 11, 0.0, 10);
  const TokenId g = spec.planted[0] == 7 || spec.planted[1] == 7 ? 8 : 7;
  const Fixture f = gen_global_confounder(spec, g, 5.0);
  const NormalizedScores s(f.matrix);
  const auto scores = std::span<const NormalizedScores>(&s, 1);
  const BinaryView bv = BinaryView::make(f.data, 0);
  EXPECT_EQ(rank_label_tokens(scores, bv, all_tokens(2000), Objective::CrossEntropy).front().token, g);
  EXPECT_NE(rank_label_tokens(scores, bv, all_tokens(2000), Objective::LikelihoodRatio).front().token, g);
}

TEST(RankLabelTokens, SingleCandidate) {
  const LogitMatrix m = random_matrix(4, 10, 2);
  const NormalizedScores s(m);
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1, 1, 0}), 1);
  const std::vector<TokenId> one = {6};
  const auto ranked = rank_label_tokens(std::span<const NormalizedScores>(&s, 1), bv, one);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].token, 6u);
  EXPECT_EQ(ranked[0].loss, lr_loss(s, 6, bv));
}

TEST(RankLabelTokens, InvariantToRowShifts) {
  LogitMatrix m = random_matrix(8, 300, 5, 2.0);
  const BinaryView bv = BinaryView::make(LabeledExamples(2, {0, 1, 0, 1, 0, 1, 0, 1}), 0);
  const NormalizedScores before(m);
  const auto expected = tokens_of(rank_label_tokens(std::span<const NormalizedScores>(&before, 1), bv, all_tokens(300)));
  LogitMatrix shifted = m;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t t = 0; t < 300; ++t) shifted.scores[i * 300 + t] += static_cast<float>(i) * 0.5f;
  }
  const NormalizedScores after(shifted);
  const auto ranked = tokens_of(rank_label_tokens(std::span<const NormalizedScores>(&after, 1), bv, all_tokens(300)));
  EXPECT_EQ(std::vector<TokenId>(expected.begin(), expected.begin() + 20),
            std::vector<TokenId>(ranked.begin(), ranked.begin() + 20));
}

TEST(FindVerbalizer, RecoversPlantedTokensInBothModes) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const PlantedSpec spec = planted_spec(2, 3000, seed);
    const Fixture f = gen_planted(spec);
    const std::vector<LogitMatrix> ms = {f.matrix};
    for (auto mode : {SearchMode::Joint, SearchMode::Separate}) {
      SearchConfig cfg;
      cfg.n_v = 1;
      cfg.mode = mode;
      const auto mvs = find_verbalizer(ms, f.data, gen_vocab(3000), cfg);
      ASSERT_EQ(mvs.size(), 1u);
      for (Label y = 0; y < 2; ++y) EXPECT_EQ(mvs[0].per_label[y][0].token, spec.planted[y]);
    }
  }
}

TEST(FindVerbalizer, SeparateMatchesJointPerPattern) {
  const Fixture a = gen_planted(planted_spec(3, 1500, 1));
  PlantedSpec spec_b = planted_spec(3, 1500, 1);
  spec_b.seed = 99;
  spec_b.pattern_id = "other";
  const Fixture b = gen_planted(spec_b);
  const std::vector<LogitMatrix> both = {a.matrix, b.matrix};
  const VocabTable vocab = gen_vocab(1500);
  SearchConfig cfg;
  cfg.n_v = 5;
  cfg.mode = SearchMode::Separate;
  const auto sep = find_verbalizer(both, a.data, vocab, cfg);
  ASSERT_EQ(sep.size(), 2u);
  cfg.mode = SearchMode::Joint;
  for (std::size_t p = 0; p < 2; ++p) {
    const auto joint = find_verbalizer(std::span<const LogitMatrix>(&both[p], 1), a.data, vocab, cfg);
    EXPECT_EQ(joint[0], sep[p]);
  }
}

TEST(FindVerbalizer, DuplicatedPatternKeepsTheRanking) {
  const Fixture f = gen_planted(planted_spec(2, 1000, 4));
  const std::vector<LogitMatrix> one = {f.matrix};
  const std::vector<LogitMatrix> two = {f.matrix, f.matrix};
  SearchConfig cfg;
  cfg.n_v = 8;
  const VocabTable vocab = gen_vocab(1000);
  const auto a = find_verbalizer(one, f.data, vocab, cfg)[0];
  const auto b = find_verbalizer(two, f.data, vocab, cfg)[0];
  for (Label y = 0; y < 2; ++y) {
    EXPECT_EQ(tokens_of(a.per_label[y]), tokens_of(b.per_label[y]));
    for (std::size_t r = 0; r < 8; ++r) EXPECT_EQ(b.per_label[y][r].loss, 2.0 * a.per_label[y][r].loss);
  }
}

TEST(FindVerbalizer, ThreadCountDoesNotChangeResult) {
  const Fixture f = gen_planted(planted_spec(4, 2500, 6));
  const std::vector<LogitMatrix> ms = {f.matrix};
  SearchConfig cfg;
  cfg.n_v = 10;
  cfg.threads = 1;
  const auto single = find_verbalizer(ms, f.data, gen_vocab(2500), cfg);
  cfg.threads = 4;
  EXPECT_EQ(find_verbalizer(ms, f.data, gen_vocab(2500), cfg), single);
}

TEST(FindVerbalizer, NvLargerThanPoolRejected) {
  const Fixture f = gen_planted(planted_spec(2, 500, 0));
  const std::vector<LogitMatrix> ms = {f.matrix};
  SearchConfig cfg;
  cfg.n_v = 1001;
  EXPECT_THROW(find_verbalizer(ms, f.data, gen_vocab(500), cfg), Error);
  cfg.n_v = 20;
  cfg.max_filtered = 10;
  EXPECT_THROW(find_verbalizer(ms, f.data, gen_vocab(500), cfg), Error);
}

TEST(FindVerbalizer, RejectsMismatchedInputs) {
  const Fixture f = gen_planted(planted_spec(2, 500, 0));
  const std::vector<LogitMatrix> ms = {f.matrix};
  SearchConfig cfg;
  EXPECT_THROW(find_verbalizer(ms, f.data, gen_vocab(499), cfg), Error);
  EXPECT_THROW(find_verbalizer(ms, LabeledExamples(2, {0, 1}), gen_vocab(500), cfg), Error);
  EXPECT_THROW(find_verbalizer(ms, LabeledExamples(3, std::vector<Label>(10, 0)), gen_vocab(500), cfg), Error);
}

TEST(AssembleVerbalizer, DistinctSkipsTokensUsedByEarlierLabels) {
  LabelRankings r;
  r.per_label = {{{5, -3.0}, {6, -2.0}, {7, -1.0}}, {{5, -4.0}, {8, -2.5}, {6, -1.0}}};
  const auto plain = assemble_verbalizer(r, 2);
  EXPECT_EQ(tokens_of(plain.per_label[1]), (std::vector<TokenId>{5, 8}));
  EXPECT_THROW(assemble_verbalizer(r, 2, true), Error);
  const auto distinct = assemble_verbalizer(r, 1, true);
  EXPECT_EQ(tokens_of(distinct.per_label[0]), (std::vector<TokenId>{5}));
  EXPECT_EQ(tokens_of(distinct.per_label[1]), (std::vector<TokenId>{8}));
}

TEST(BruteForceMle, ConstructedInstance) {
  const std::vector<LogitMatrix> ms = {make_matrix({{3.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 3.0f}})};
  const auto r = brute_force_mle(ms, LabeledExamples(2, {0, 1}), {all_tokens(3), all_tokens(3)});
  EXPECT_EQ(r.verbalizer, (Verbalizer{0, 2}));
  EXPECT_NEAR(r.log_likelihood, -0.0971747031474841175, 1e-12);
}

TEST(BruteForceMle, TiesGoToSmallestTuple) {
  const std::vector<LogitMatrix> ms = {uniform_matrix(6, 4)};
  const LabeledExamples data(3, {0, 1, 2, 0, 1, 2});
  const std::vector<TokenId> pool = {3, 1, 2};
  const auto r = brute_force_mle(ms, data, {pool, pool, pool});
  EXPECT_EQ(r.verbalizer, (Verbalizer{1, 1, 1}));
  EXPECT_NEAR(r.log_likelihood, 6.0 * std::log(1.0 / 3.0), 1e-12);
}

TEST(BruteForceMle, EnumerationCap) {
  const std::vector<LogitMatrix> ms = {uniform_matrix(4, 100)};
  const LabeledExamples data(4, {0, 1, 2, 3});
  const std::vector<std::vector<TokenId>> pools(4, all_tokens(100));
  EXPECT_THROW(brute_force_mle(ms, data, pools), Error);
  EXPECT_THROW(brute_force_mle(ms, data, {all_tokens(3), all_tokens(3), all_tokens(3), all_tokens(3)}, 80), Error);
  EXPECT_NO_THROW(brute_force_mle(ms, data, {all_tokens(3), all_tokens(3), all_tokens(3), all_tokens(3)}, 81));
}

TEST(BruteForceMle, RejectsBadCandidates) {
  const std::vector<LogitMatrix> ms = {uniform_matrix(2, 5)};
  const LabeledExamples data(2, {0, 1});
  EXPECT_THROW(brute_force_mle(ms, data, {all_tokens(5)}), Error);
  EXPECT_THROW(brute_force_mle(ms, data, {all_tokens(5), {}}), Error);
  EXPECT_THROW(brute_force_mle(ms, data, {all_tokens(5), {5}}), Error);
}

TEST(BruteForceMle, MatchesNaiveOracle) {
  Lcg64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    petal::testing::NaiveInstance inst;
    inst.k = 1 + rng.below(3);
    inst.vocab_size = 2 + rng.below(7);
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) inst.labels.push_back(static_cast<Label>(rng.below(inst.k)));
    std::vector<LogitMatrix> ms;
    const std::size_t patterns = 1 + rng.below(2);
    for (std::size_t p = 0; p < patterns; ++p) {
      ms.push_back(random_matrix(n, inst.vocab_size, rng.below(1u << 30), 2.0));
      inst.scores.push_back(ms.back().scores);
    }
    const auto expected = petal::testing::naive_argmax(inst);
    const std::vector<std::vector<TokenId>> pools(inst.k, all_tokens(inst.vocab_size));
    const auto got = brute_force_mle(ms, LabeledExamples(inst.k, inst.labels), pools);
    EXPECT_EQ(got.verbalizer, expected.verbalizer);
    EXPECT_NEAR(got.log_likelihood, expected.log_likelihood, 1e-9);
  }
}

TEST(RandomVerbalizer, DeterministicAndWellFormed) {
  const std::vector<TokenId> t_f = {3, 9, 12, 40, 41, 77, 90, 91};
  const auto a = random_verbalizer(t_f, 3, 4, 17);
  EXPECT_EQ(a, random_verbalizer(t_f, 3, 4, 17));
  ASSERT_EQ(a.num_classes(), 3u);
  for (const auto& list : a.per_label) {
    const auto ids = tokens_of(list);
    ASSERT_EQ(ids.size(), 4u);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    for (TokenId t : ids) EXPECT_TRUE(std::binary_search(t_f.begin(), t_f.end(), t));
    for (const auto& tl : list) EXPECT_EQ(tl.loss, 0.0);
  }
}

TEST(RandomVerbalizer, SeedsDiffer) {
  const auto t_f = all_tokens(1000);
  EXPECT_NE(random_verbalizer(t_f, 2, 5, 1), random_verbalizer(t_f, 2, 5, 2));
}

TEST(RandomVerbalizer, WholePoolAndExhaustion) {
  const std::vector<TokenId> t_f = {4, 8, 15};
  const auto mv = random_verbalizer(t_f, 2, 3, 0);
  for (const auto& list : mv.per_label) EXPECT_EQ(tokens_of(list), t_f);
  EXPECT_THROW(random_verbalizer(t_f, 2, 4, 0), Error);
  EXPECT_THROW(random_verbalizer(t_f, 0, 1, 0), Error);
}
