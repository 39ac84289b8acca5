#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "petal/losses.hpp"
#include "petal/parallel.hpp"
#include "petal/probability.hpp"
#include "petal/types.hpp"

namespace petal {

inline constexpr std::size_t kDefaultMaxFiltered = 10000;
inline constexpr std::size_t kDefaultMaxCandidates = 1000;

namespace detail {

/// Letters recognized by the word predicate: ASCII, Latin-1 and Latin
/// Extended-A/B, Greek and Cyrillic.
inline bool is_letter(std::uint32_t cp) {
  if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return true;
  if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
  if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x37E && cp != 0x387;
  return cp >= 0x400 && cp <= 0x4FF;
}

/// Decodes UTF-8 into code points; invalid bytes decode to U+FFFD.
inline std::vector<std::uint32_t> code_points(std::string_view s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    std::uint32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (std::size_t j = 1; j < len; ++j) cp = (cp << 6) | (static_cast<unsigned char>(s[i + j]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace detail

/// Decides whether a vocabulary token is a real word: it must start a word
/// and, after leading whitespace, contain at least two letters. With
/// alpha_only it must consist of letters only.
struct WordPredicate {
  bool alpha_only = true;

  bool operator()(const VocabEntry& e) const {
    if (!e.word_initial) return false;
    std::string_view s = e.surface;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    std::size_t letters = 0;
    for (std::uint32_t cp : detail::code_points(s)) {
      if (detail::is_letter(cp)) {
        ++letters;
      } else if (alpha_only) {
        return false;
      }
    }
    return letters >= 2;
  }
};

/// The filtered vocabulary: word-like tokens, the `max_filtered` most frequent
/// kept (ties to the lower id). Returned in ascending id order.
inline std::vector<TokenId> filter_vocab(const VocabTable& vocab, std::size_t max_filtered = kDefaultMaxFiltered,
                                         WordPredicate predicate = {}) {
  std::vector<TokenId> kept;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    if (predicate(vocab.entries[t])) kept.push_back(static_cast<TokenId>(t));
  }
  if (kept.size() > max_filtered) {
    const auto more_frequent = [&](TokenId a, TokenId b) {
      if (vocab[a].frequency != vocab[b].frequency) return vocab[a].frequency > vocab[b].frequency;
      return a < b;
    };
    std::nth_element(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(max_filtered), kept.end(),
                     more_frequent);
    kept.resize(max_filtered);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// How per-pattern scores combine when several patterns feed candidate
/// selection: Summed ranks by positive_ce summed over patterns; PerPattern
/// ranks within each pattern and keeps tokens by their best rank.
enum class CandidatePooling { Summed, PerPattern };

namespace detail {

inline std::vector<TokenLoss> positive_ce_table(const NormalizedScores& scores, const BinaryView& bv,
                                                std::span<const TokenId> tokens, unsigned threads) {
  std::vector<TokenLoss> table(tokens.size());
  parallel_for(tokens.size(), threads, [&](std::size_t j) {
    table[j] = TokenLoss{tokens[j], positive_ce(scores, tokens[j], bv.positives)};
  });
  return table;
}

inline void keep_best(std::vector<TokenLoss>& ranked, std::size_t count) {
  count = std::min(count, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count), ranked.end(),
                    ranks_before);
  ranked.resize(count);
}

}  // namespace detail

/// The `max_candidates` tokens of t_f most likely on the positives of bv,
/// best first.
inline std::vector<TokenId> label_candidates(std::span<const NormalizedScores> scores, const BinaryView& bv,
                                             std::span<const TokenId> t_f,
                                             std::size_t max_candidates = kDefaultMaxCandidates,
                                             CandidatePooling pooling = CandidatePooling::Summed,
                                             unsigned threads = 1) {
  if (t_f.empty()) throw Error("empty filtered vocabulary");
  if (scores.empty()) throw Error("no score matrices");
  if (bv.positives.empty()) throw Error("empty positives");

  std::vector<TokenLoss> ranked(t_f.size());
  if (pooling == CandidatePooling::Summed || scores.size() == 1) {
    for (std::size_t p = 0; p < scores.size(); ++p) {
      const auto table = detail::positive_ce_table(scores[p], bv, t_f, threads);
      for (std::size_t j = 0; j < t_f.size(); ++j) {
        ranked[j].token = t_f[j];
        ranked[j].loss = p == 0 ? table[j].loss : ranked[j].loss + table[j].loss;
      }
    }
  } else {
    // Best (lowest) per-pattern rank becomes the sort key.
    for (std::size_t j = 0; j < t_f.size(); ++j) {
      ranked[j] = TokenLoss{t_f[j], static_cast<double>(t_f.size())};
    }
    std::vector<std::size_t> position(t_f.size());
    for (const auto& s : scores) {
      auto table = detail::positive_ce_table(s, bv, t_f, threads);
      for (std::size_t j = 0; j < table.size(); ++j) position[j] = j;
      std::sort(position.begin(), position.end(),
                [&](std::size_t a, std::size_t b) { return ranks_before(table[a], table[b]); });
      for (std::size_t r = 0; r < position.size(); ++r) {
        ranked[position[r]].loss = std::min(ranked[position[r]].loss, static_cast<double>(r));
      }
    }
  }
  detail::keep_best(ranked, max_candidates);

  std::vector<TokenId> out;
  out.reserve(ranked.size());
  for (const auto& tl : ranked) out.push_back(tl.token);
  return out;
}

inline std::vector<TokenId> label_candidates(const LogitMatrix& m, const BinaryView& bv,
                                             std::span<const TokenId> t_f,
                                             std::size_t max_candidates = kDefaultMaxCandidates) {
  const NormalizedScores scores(m);
  return label_candidates(std::span<const NormalizedScores>(&scores, 1), bv, t_f, max_candidates);
}

/// Filtered vocabulary and per-label candidate pools.
struct CandidateSets {
  std::vector<TokenId> t_f;
  std::vector<std::vector<TokenId>> per_label;
};

inline CandidateSets build_candidate_sets(std::span<const NormalizedScores> scores, const LabeledExamples& data,
                                          std::vector<TokenId> t_f, std::size_t max_candidates,
                                          CandidatePooling pooling = CandidatePooling::Summed,
                                          unsigned threads = 1) {
  CandidateSets sets;
  sets.t_f = std::move(t_f);
  for (std::size_t y = 0; y < data.num_classes(); ++y) {
    const BinaryView bv = BinaryView::make(data, static_cast<Label>(y));
    sets.per_label.push_back(label_candidates(scores, bv, sets.t_f, max_candidates, pooling, threads));
  }
  return sets;
}

}  // namespace petal
