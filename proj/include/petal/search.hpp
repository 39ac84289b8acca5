#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "petal/candidates.hpp"
#include "petal/losses.hpp"
#include "petal/parallel.hpp"
#include "petal/probability.hpp"
#include "petal/rng.hpp"
#include "petal/types.hpp"

namespace petal {

/// Separate: one verbalizer per pattern. Joint: one verbalizer for all
/// patterns, per-token losses summed across patterns.
enum class SearchMode { Separate, Joint };

/// Token objective. CrossEntropy exists to demonstrate that it favors tokens
/// that are likely everywhere; searches should use LikelihoodRatio.
enum class Objective { LikelihoodRatio, CrossEntropy };

inline constexpr std::size_t kDefaultVerbalizationsPerLabel = 10;

struct SearchConfig {
  std::size_t n_v = kDefaultVerbalizationsPerLabel;
  SearchMode mode = SearchMode::Joint;
  std::size_t max_filtered = kDefaultMaxFiltered;
  std::size_t max_candidates = kDefaultMaxCandidates;
  Objective objective = Objective::LikelihoodRatio;
  std::uint64_t seed = 0;
  /// Greedy cross-label deduplication (labels ascending).
  bool distinct = false;
  CandidatePooling pooling = CandidatePooling::Summed;
  WordPredicate word_predicate{};
  unsigned threads = 1;

  void validate() const {
    if (n_v == 0) throw Error("n_v must be at least 1");
    if (max_candidates == 0) throw Error("max_candidates must be at least 1");
    if (n_v > max_candidates) throw Error("n_v exceeds candidate pool");
  }
};

/// Every candidate with its objective summed over all score matrices, sorted
/// ascending by loss (ties to the lower token id).
inline std::vector<TokenLoss> rank_label_tokens(std::span<const NormalizedScores> scores, const BinaryView& bv,
                                                std::span<const TokenId> candidates,
                                                Objective objective = Objective::LikelihoodRatio,
                                                unsigned threads = 1) {
  if (candidates.empty()) throw Error("empty candidate list");
  if (scores.empty()) throw Error("no score matrices");
  bv.require_non_degenerate();

  std::vector<TokenLoss> ranked(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t j) {
    double total = 0.0;
    for (std::size_t p = 0; p < scores.size(); ++p) {
      const double loss = objective == Objective::LikelihoodRatio ? lr_loss(scores[p], candidates[j], bv)
                                                                  : ce_loss(scores[p], candidates[j], bv);
      total = p == 0 ? loss : total + loss;
    }
    ranked[j] = TokenLoss{candidates[j], total};
  });
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  return ranked;
}

/// Full per-label rankings of one search group (all patterns for Joint, a
/// single pattern for Separate). Independent of n_v.
struct LabelRankings {
  std::string pattern_id;
  CandidateSets candidates;
  std::vector<std::vector<TokenLoss>> per_label;
};

/// Takes the first n_v tokens of every label's ranking.
inline MultiVerbalizer assemble_verbalizer(const LabelRankings& rankings, std::size_t n_v, bool distinct = false) {
  if (n_v == 0) throw Error("n_v must be at least 1");
  MultiVerbalizer mv;
  std::unordered_set<TokenId> used;
  for (std::size_t y = 0; y < rankings.per_label.size(); ++y) {
    const auto& ranked = rankings.per_label[y];
    std::vector<TokenLoss> list;
    for (const auto& tl : ranked) {
      if (list.size() == n_v) break;
      if (distinct && used.contains(tl.token)) continue;
      list.push_back(tl);
    }
    if (list.size() < n_v) {
      throw Error("n_v exceeds candidate pool (label " + std::to_string(y) + " has " +
                  std::to_string(list.size()) + " usable candidates)");
    }
    if (distinct) {
      for (const auto& tl : list) used.insert(tl.token);
    }
    mv.per_label.push_back(std::move(list));
  }
  return mv;
}

namespace detail {

inline void check_search_inputs(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                                const VocabTable& vocab) {
  if (matrices.empty()) throw Error("at least one logit matrix is required");
  for (const auto& m : matrices) {
    check_alignment(m, data);
    if (m.vocab_size != vocab.size()) {
      throw Error("matrix '" + m.pattern_id + "' has vocab_size " + std::to_string(m.vocab_size) +
                  " but the vocabulary has " + std::to_string(vocab.size()) + " entries");
    }
  }
  data.require_non_degenerate();
}

inline LabelRankings rank_group(std::span<const NormalizedScores> scores, const LabeledExamples& data,
                                const std::vector<TokenId>& t_f, const SearchConfig& cfg) {
  LabelRankings r;
  r.candidates = build_candidate_sets(scores, data, t_f, cfg.max_candidates, cfg.pooling, cfg.threads);
  for (std::size_t y = 0; y < data.num_classes(); ++y) {
    const BinaryView bv = BinaryView::make(data, static_cast<Label>(y));
    r.per_label.push_back(rank_label_tokens(scores, bv, r.candidates.per_label[y], cfg.objective, cfg.threads));
  }
  return r;
}

}  // namespace detail

/// Candidate filtering and ranking for every search group; the expensive part
/// of a search, reusable across n_v values.
inline std::vector<LabelRankings> prepare_search(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                                                 const VocabTable& vocab, const SearchConfig& cfg) {
  cfg.validate();
  detail::check_search_inputs(matrices, data, vocab);
  const std::vector<TokenId> t_f = filter_vocab(vocab, cfg.max_filtered, cfg.word_predicate);
  if (t_f.empty()) throw Error("empty filtered vocabulary");

  std::vector<NormalizedScores> scores;
  scores.reserve(matrices.size());
  for (const auto& m : matrices) scores.emplace_back(m, cfg.threads);

  std::vector<LabelRankings> groups;
  if (cfg.mode == SearchMode::Joint) {
    groups.push_back(detail::rank_group(scores, data, t_f, cfg));
    groups.back().pattern_id = matrices.size() == 1 ? matrices[0].pattern_id : "joint";
  } else {
    for (std::size_t p = 0; p < scores.size(); ++p) {
      groups.push_back(detail::rank_group(std::span<const NormalizedScores>(&scores[p], 1), data, t_f, cfg));
      groups.back().pattern_id = matrices[p].pattern_id;
    }
  }
  return groups;
}

/// Finds a multi-verbalizer with cfg.n_v tokens per label: one for Joint
/// mode, one per matrix (in input order) for Separate mode.
inline std::vector<MultiVerbalizer> find_verbalizer(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                                                    const VocabTable& vocab, const SearchConfig& cfg) {
  const auto groups = prepare_search(matrices, data, vocab, cfg);
  std::vector<MultiVerbalizer> out;
  for (const auto& g : groups) out.push_back(assemble_verbalizer(g, cfg.n_v, cfg.distinct));
  return out;
}

// -------------------------------------------------------- exhaustive oracle

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

struct OracleResult {
  Verbalizer verbalizer;
  double log_likelihood = 0.0;
};

/// Exact maximum-likelihood verbalizer by enumerating every combination of
/// per-label candidates. Ties go to the lexicographically smallest token-id
/// tuple.
inline OracleResult brute_force_mle(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                                    const std::vector<std::vector<TokenId>>& candidates,
                                    std::uint64_t cap = kDefaultEnumerationCap) {
  const std::size_t k = data.num_classes();
  if (candidates.size() != k) throw Error("missing label assignment: need candidates for every label");
  if (matrices.empty()) throw Error("at least one logit matrix is required");
  std::uint64_t product = 1;
  for (const auto& c : candidates) {
    if (c.empty()) throw Error("empty candidate list");
    if (product > cap / c.size()) throw Error("enumeration cap exceeded");
    product *= c.size();
  }
  for (const auto& m : matrices) {
    check_alignment(m, data);
    for (const auto& c : candidates) {
      for (TokenId t : c) {
        if (t >= m.vocab_size) throw Error("candidate token " + std::to_string(t) + " out of range");
      }
    }
  }

  OracleResult best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> index(k, 0);
  Verbalizer v(k);
  while (true) {
    for (std::size_t y = 0; y < k; ++y) v[y] = candidates[y][index[y]];
    const double ll = mle_log_likelihood(matrices, v, data);
    if (best.verbalizer.empty() || ll > best.log_likelihood ||
        (ll == best.log_likelihood && v < best.verbalizer)) {
      best.verbalizer = v;
      best.log_likelihood = ll;
    }
    std::size_t y = k;
    while (y > 0) {
      --y;
      if (++index[y] < candidates[y].size()) break;
      index[y] = 0;
      if (y == 0) return best;
    }
  }
}

// ---------------------------------------------------------- random baseline

/// n_v distinct tokens per label drawn uniformly without replacement from
/// t_f with Lcg64(seed). Labels draw in ascending order from one stream.
/// Lists are stored in ascending id order with loss 0.
inline MultiVerbalizer random_verbalizer(std::span<const TokenId> t_f, std::size_t k, std::size_t n_v,
                                         std::uint64_t seed) {
  if (k == 0) throw Error("k must be positive");
  if (n_v == 0) throw Error("n_v must be at least 1");
  if (t_f.size() < n_v) {
    throw Error("filtered vocabulary has " + std::to_string(t_f.size()) + " tokens, fewer than n_v=" +
                std::to_string(n_v));
  }
  Lcg64 rng(seed);
  MultiVerbalizer mv;
  std::vector<TokenId> pool(t_f.begin(), t_f.end());
  for (std::size_t y = 0; y < k; ++y) {
    std::copy(t_f.begin(), t_f.end(), pool.begin());
    for (std::size_t j = 0; j < n_v; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(rng.below(pool.size() - j));
      std::swap(pool[j], pool[r]);
    }
    std::vector<TokenId> picked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_v));
    std::sort(picked.begin(), picked.end());
    std::vector<TokenLoss> list;
    for (TokenId t : picked) list.push_back(TokenLoss{t, 0.0});
    mv.per_label.push_back(std::move(list));
  }
  return mv;
}

}  // namespace petal
