#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "petal/error.hpp"

namespace petal {

using TokenId = std::uint32_t;
using Label = std::uint32_t;

/// Raw masked-position scores of one pattern: entry (i, t) is the unnormalized
/// logit the language model assigns to token t for example i. Row-major.
struct LogitMatrix {
  std::string pattern_id;
  std::size_t num_examples = 0;
  std::size_t vocab_size = 0;
  std::vector<float> scores;

  std::span<const float> row(std::size_t example) const {
    return {scores.data() + example * vocab_size, vocab_size};
  }
  float at(std::size_t example, TokenId token) const {
    return scores[example * vocab_size + token];
  }

  void validate() const {
    if (vocab_size == 0) throw Error("vocab_size must be positive");
    if (scores.size() != num_examples * vocab_size) {
      throw Error("score count does not match num_examples x vocab_size");
    }
    for (float s : scores) {
      if (!std::isfinite(s)) throw Error("non-finite score");
    }
  }
};

/// Example labels in [0, k) with per-class counts.
class LabeledExamples {
 public:
  LabeledExamples() = default;

  LabeledExamples(std::size_t num_classes, std::vector<Label> labels)
      : num_classes_(num_classes), labels_(std::move(labels)), counts_(num_classes, 0) {
    if (num_classes_ == 0) throw Error("k must be positive");
    for (Label y : labels_) {
      if (y >= num_classes_) {
        throw Error("label " + std::to_string(y) + " out of range for k=" +
                    std::to_string(num_classes_));
      }
      ++counts_[y];
    }
  }

  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  Label operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  /// Every class must have 1 <= n_y < n for one-vs-rest weighting to exist.
  void require_non_degenerate() const {
    for (std::size_t y = 0; y < num_classes_; ++y) {
      if (counts_[y] == 0 || counts_[y] == labels_.size()) {
        throw Error("degenerate class " + std::to_string(y) + " (n_y=" +
                    std::to_string(counts_[y]) + ", n=" + std::to_string(labels_.size()) + ")");
      }
    }
  }

  friend bool operator==(const LabeledExamples&, const LabeledExamples&) = default;

 private:
  std::size_t num_classes_ = 0;
  std::vector<Label> labels_;
  std::vector<std::size_t> counts_;
};

struct VocabEntry {
  std::string surface;
  std::uint64_t frequency = 0;
  bool word_initial = false;

  friend bool operator==(const VocabEntry&, const VocabEntry&) = default;
};

/// Token metadata indexed densely by token id.
struct VocabTable {
  std::vector<VocabEntry> entries;

  std::size_t size() const { return entries.size(); }
  const VocabEntry& operator[](TokenId t) const { return entries[t]; }

  friend bool operator==(const VocabTable&, const VocabTable&) = default;
};

struct TokenLoss {
  TokenId token = 0;
  double loss = 0.0;

  friend bool operator==(const TokenLoss&, const TokenLoss&) = default;
};

/// Strict weak order used for every token ranking: ascending loss, then id.
inline bool ranks_before(const TokenLoss& a, const TokenLoss& b) {
  if (a.loss != b.loss) return a.loss < b.loss;
  return a.token < b.token;
}

/// One token per label.
using Verbalizer = std::vector<TokenId>;

/// Ordered token lists per label; the list length is n_v.
struct MultiVerbalizer {
  std::vector<std::vector<TokenLoss>> per_label;

  std::size_t num_classes() const { return per_label.size(); }

  std::size_t max_list_size() const {
    std::size_t n = 0;
    for (const auto& l : per_label) n = std::max(n, l.size());
    return n;
  }

  /// Non-empty lists without duplicate tokens, all ids below vocab_size.
  void validate(std::size_t vocab_size) const {
    if (per_label.empty()) throw Error("multi-verbalizer has no labels");
    for (std::size_t y = 0; y < per_label.size(); ++y) {
      const auto& list = per_label[y];
      if (list.empty()) throw Error("empty token list for label " + std::to_string(y));
      std::vector<TokenId> ids;
      ids.reserve(list.size());
      for (const auto& tl : list) {
        if (tl.token >= vocab_size) {
          throw Error("token " + std::to_string(tl.token) + " out of range for vocab_size=" +
                      std::to_string(vocab_size));
        }
        ids.push_back(tl.token);
      }
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error("duplicate token in list for label " + std::to_string(y));
      }
    }
  }

  static MultiVerbalizer from_verbalizer(const Verbalizer& v) {
    MultiVerbalizer mv;
    for (TokenId t : v) mv.per_label.push_back({TokenLoss{t, 0.0}});
    return mv;
  }

  friend bool operator==(const MultiVerbalizer&, const MultiVerbalizer&) = default;
};

}  // namespace petal
