#pragma once

// Synthetic logit matrices with known structure. Background scores are i.i.d.
// standard normal drawn row-major from Lcg64(seed) (see rng.hpp), so a spec
// always produces the same matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "petal/rng.hpp"
#include "petal/types.hpp"

namespace petal {

struct PlantedSpec {
  std::size_t k = 2;
  std::size_t examples_per_class = 5;
  std::size_t vocab_size = 10000;
  double boost = 5.0;
  /// planted[y] is boosted on the rows of class y.
  std::vector<TokenId> planted;
  std::uint64_t seed = 0;
  std::string pattern_id = "synthetic";

  void validate() const {
    if (k == 0) throw Error("k must be positive");
    if (vocab_size == 0) throw Error("vocab_size must be positive");
    if (!std::isfinite(boost)) throw Error("boost must be finite");
    if (planted.size() != k) throw Error("need one planted token per label");
    std::vector<TokenId> sorted = planted;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error("planted tokens must be distinct");
    }
    if (!sorted.empty() && sorted.back() >= vocab_size) throw Error("planted token out of range");
  }
};

struct Fixture {
  LogitMatrix matrix;
  LabeledExamples data;
};

/// Distinct token ids for k labels, drawn with Lcg64(seed).
inline std::vector<TokenId> choose_planted_tokens(std::size_t k, std::size_t vocab_size, std::uint64_t seed) {
  if (k > vocab_size) throw Error("more labels than vocabulary entries");
  Lcg64 rng(seed);
  std::vector<TokenId> picked;
  while (picked.size() < k) {
    const auto t = static_cast<TokenId>(rng.below(vocab_size));
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
  }
  return picked;
}

namespace detail {

inline Fixture background(const PlantedSpec& spec) {
  const std::size_t n = spec.k * spec.examples_per_class;
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<Label>(i / spec.examples_per_class);

  Fixture f{LogitMatrix{spec.pattern_id, n, spec.vocab_size, std::vector<float>(n * spec.vocab_size)},
            LabeledExamples(spec.k, std::move(labels))};
  Lcg64 rng(spec.seed);
  for (float& s : f.matrix.scores) s = static_cast<float>(rng.normal());
  return f;
}

inline void plant(Fixture& f, const PlantedSpec& spec) {
  for (std::size_t i = 0; i < f.matrix.num_examples; ++i) {
    float& s = f.matrix.scores[i * spec.vocab_size + spec.planted[f.data[i]]];
    s = static_cast<float>(static_cast<double>(s) + spec.boost);
  }
}

}  // namespace detail

/// Background plus `boost` on the planted token of each class, on that
/// class's rows only. Rows are class-blocked (class 0 first).
inline Fixture gen_planted(const PlantedSpec& spec) {
  spec.validate();
  Fixture f = detail::background(spec);
  detail::plant(f, spec);
  return f;
}

/// gen_planted plus a confounder whose score is the constant
/// `confounder_boost` on every row: likely everywhere, informative nowhere.
inline Fixture gen_global_confounder(const PlantedSpec& spec, TokenId confounder, double confounder_boost) {
  spec.validate();
  if (confounder >= spec.vocab_size) throw Error("confounder token out of range");
  if (std::find(spec.planted.begin(), spec.planted.end(), confounder) != spec.planted.end()) {
    throw Error("confounder must differ from the planted tokens");
  }
  if (!std::isfinite(confounder_boost)) throw Error("boost must be finite");
  Fixture f = detail::background(spec);
  detail::plant(f, spec);
  for (std::size_t i = 0; i < f.matrix.num_examples; ++i) {
    f.matrix.scores[i * spec.vocab_size + confounder] = static_cast<float>(confounder_boost);
  }
  return f;
}

/// Vocabulary whose every token passes the word predicate: surface "w" plus
/// the id in base-26 letters, frequency decreasing with id.
inline VocabTable gen_vocab(std::size_t vocab_size) {
  VocabTable vocab;
  vocab.entries.reserve(vocab_size);
  for (std::size_t t = 0; t < vocab_size; ++t) {
    std::string letters;
    std::size_t v = t;
    do {
      letters.insert(letters.begin(), static_cast<char>('a' + v % 26));
      v /= 26;
    } while (v > 0);
    vocab.entries.push_back(VocabEntry{"w" + letters, static_cast<std::uint64_t>(vocab_size - t), true});
  }
  return vocab;
}

}  // namespace petal
