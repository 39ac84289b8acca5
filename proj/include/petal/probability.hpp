#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "petal/error.hpp"
#include "petal/parallel.hpp"
#include "petal/types.hpp"

namespace petal {

// ------------------------------------------------------------ log-sum-exp

/// log(sum_t exp(s_t)), max-subtracted, accumulated in double in ascending
/// index order.
template <std::floating_point T>
double log_sum_exp(std::span<const T> scores) {
  if (scores.empty()) throw Error("log-sum-exp of an empty vector");
  double max = static_cast<double>(scores[0]);
  for (T s : scores) {
    if (!std::isfinite(s)) throw Error("non-finite score");
    max = std::max(max, static_cast<double>(s));
  }
  double sum = 0.0;
  for (T s : scores) sum += std::exp(static_cast<double>(s) - max);
  return max + std::log(sum);
}

/// Same as log_sum_exp but skipping one index. The vector must have at least
/// two entries.
template <std::floating_point T>
double log_sum_exp_excluding(std::span<const T> scores, std::size_t skip) {
  double max = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t != skip) max = std::max(max, static_cast<double>(scores[t]));
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t != skip) sum += std::exp(static_cast<double>(scores[t]) - max);
  }
  return max + std::log(sum);
}

/// Log-probabilities of a softmax over the whole vector.
template <std::floating_point T>
std::vector<double> log_softmax_row(std::span<const T> scores) {
  const double lse = log_sum_exp(scores);
  std::vector<double> out(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) out[t] = static_cast<double>(scores[t]) - lse;
  return out;
}

template <std::floating_point T>
std::vector<double> log_softmax_row(const std::vector<T>& scores) {
  return log_softmax_row(std::span<const T>(scores));
}

// --------------------------------------------------- binary probabilities

/// log q(1|x) and log q(0|x) of the one-token binary classifier, where q(1|x)
/// is the full-vocabulary softmax probability of the token.
struct BinaryLogProb {
  double log_q1 = 0.0;
  double log_q0 = 0.0;
};

/// Caches the per-row log normalizer of a matrix so that binary probabilities
/// of many tokens cost O(1) each. Holds a reference to the matrix.
class NormalizedScores {
 public:
  explicit NormalizedScores(const LogitMatrix& m, unsigned threads = 1)
      : matrix_(&m), log_norm_(m.num_examples) {
    parallel_for(m.num_examples, threads, [&](std::size_t i) { log_norm_[i] = log_sum_exp(m.row(i)); });
  }

  NormalizedScores(LogitMatrix&&, unsigned = 1) = delete;

  const LogitMatrix& matrix() const { return *matrix_; }
  std::size_t num_examples() const { return matrix_->num_examples; }
  std::size_t vocab_size() const { return matrix_->vocab_size; }
  double log_normalizer(std::size_t example) const { return log_norm_[example]; }

  double log_q1(std::size_t example, TokenId token) const {
    return static_cast<double>(matrix_->at(example, token)) - log_norm_[example];
  }

  BinaryLogProb binary(std::size_t example, TokenId token) const {
    BinaryLogProb p;
    p.log_q1 = log_q1(example, token);
    if (p.log_q1 < -std::numbers::ln2) {
      p.log_q0 = std::log1p(-std::exp(p.log_q1));
    } else {
      // The token holds at least half the mass; 1 - q1 may be below double
      // resolution, so sum the remaining tokens directly.
      p.log_q0 = log_sum_exp_excluding(matrix_->row(example), token) - log_norm_[example];
    }
    return p;
  }

  void check_token(TokenId token) const {
    if (token >= matrix_->vocab_size) {
      throw Error("token " + std::to_string(token) + " out of range for vocab_size=" +
                  std::to_string(matrix_->vocab_size));
    }
    if (matrix_->vocab_size < 2) throw Error("degenerate vocabulary");
  }

 private:
  const LogitMatrix* matrix_;
  std::vector<double> log_norm_;
};

/// Per-example (log q1, log q0) for one token.
inline std::vector<BinaryLogProb> binary_log_probs(const NormalizedScores& scores, TokenId token) {
  scores.check_token(token);
  std::vector<BinaryLogProb> out(scores.num_examples());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores.binary(i, token);
  return out;
}

inline std::vector<BinaryLogProb> binary_log_probs(const LogitMatrix& m, TokenId token) {
  return binary_log_probs(NormalizedScores(m), token);
}

// ---------------------------------------------------- class distributions

struct ClassDistribution {
  std::vector<double> probabilities;

  /// Lowest label wins ties.
  Label argmax() const {
    return static_cast<Label>(std::max_element(probabilities.begin(), probabilities.end()) -
                              probabilities.begin());
  }
};

/// Softmax over a short vector of label scores.
inline ClassDistribution softmax_labels(const std::vector<double>& values) {
  const double max = *std::max_element(values.begin(), values.end());
  ClassDistribution d;
  d.probabilities.resize(values.size());
  double sum = 0.0;
  for (std::size_t y = 0; y < values.size(); ++y) {
    d.probabilities[y] = std::exp(values[y] - max);
    sum += d.probabilities[y];
  }
  for (double& p : d.probabilities) p /= sum;
  return d;
}

/// log-softmax over label scores; the log-space twin of softmax_labels.
inline std::vector<double> log_softmax_labels(const std::vector<double>& values) {
  return log_softmax_row(std::span<const double>(values));
}

/// Raw scores of the verbalization tokens, one per label.
template <std::floating_point T>
std::vector<double> verbalizer_scores(std::span<const T> row, const Verbalizer& v) {
  if (v.empty()) throw Error("verbalizer has no labels");
  std::vector<double> values(v.size());
  for (std::size_t y = 0; y < v.size(); ++y) {
    if (v[y] >= row.size()) {
      throw Error("token " + std::to_string(v[y]) + " out of range for vocab_size=" +
                  std::to_string(row.size()));
    }
    values[y] = static_cast<double>(row[v[y]]);
  }
  return values;
}

/// Per-label mean score over each label's token list.
template <std::floating_point T>
std::vector<double> multi_verbalizer_scores(std::span<const T> row, const MultiVerbalizer& mv) {
  if (mv.per_label.empty()) throw Error("multi-verbalizer has no labels");
  std::vector<double> values(mv.num_classes());
  for (std::size_t y = 0; y < mv.num_classes(); ++y) {
    const auto& list = mv.per_label[y];
    if (list.empty()) throw Error("empty token list for label " + std::to_string(y));
    double sum = 0.0;
    for (std::size_t j = 0; j < list.size(); ++j) {
      if (list[j].token >= row.size()) {
        throw Error("token " + std::to_string(list[j].token) + " out of range for vocab_size=" +
                    std::to_string(row.size()));
      }
      const double s = static_cast<double>(row[list[j].token]);
      sum = j == 0 ? s : sum + s;
    }
    values[y] = sum / static_cast<double>(list.size());
  }
  return values;
}

/// Distribution over k labels normalized over the verbalization tokens only.
template <std::floating_point T>
ClassDistribution class_probs(std::span<const T> row, const Verbalizer& v) {
  return softmax_labels(verbalizer_scores(row, v));
}

/// As class_probs, with each label scored by the mean of its tokens' scores.
template <std::floating_point T>
ClassDistribution multi_class_probs(std::span<const T> row, const MultiVerbalizer& mv) {
  return softmax_labels(multi_verbalizer_scores(row, mv));
}

// ------------------------------------------------------- imbalance weights

/// Non-negative rational with 64-bit parts, kept reduced.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Ratio make(std::uint64_t num, std::uint64_t den) {
    const std::uint64_t g = std::gcd(num, den);
    return g == 0 ? Ratio{0, 1} : Ratio{num / g, den / g};
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Ratio operator+(const Ratio& a, const Ratio& b) {
    const std::uint64_t g = std::gcd(a.den, b.den);
    const std::uint64_t den = a.den / g * b.den;
    return make(a.num * (den / a.den) + b.num * (den / b.den), den);
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Exponent compensating one-vs-rest imbalance: 1 for positives,
/// n_y / (n - n_y) for negatives.
inline Ratio imbalance_weight(bool positive, std::size_t n_y, std::size_t n) {
  if (n_y == 0 || n_y >= n) throw Error("degenerate class");
  if (positive) return Ratio{1, 1};
  return Ratio::make(n_y, n - n_y);
}

/// One-vs-rest view of the labeled data for a single target label.
///
/// `members` lists the examples that losses sum over (all of them unless the
/// view was restricted); the weights always come from the full-data counts.
struct BinaryView {
  Label target = 0;
  std::size_t n_y = 0;
  std::size_t n = 0;
  std::vector<std::uint8_t> is_positive;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::vector<std::size_t> members;

  static BinaryView make(const LabeledExamples& data, Label target) {
    if (target >= data.num_classes()) throw Error("target label out of range");
    BinaryView bv;
    bv.target = target;
    bv.n = data.size();
    bv.is_positive.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      bv.is_positive[i] = data[i] == target;
      (bv.is_positive[i] ? bv.positives : bv.negatives).push_back(i);
      bv.members.push_back(i);
    }
    bv.n_y = bv.positives.size();
    return bv;
  }

  bool non_degenerate() const { return n_y >= 1 && n_y < n; }

  void require_non_degenerate() const {
    if (!non_degenerate()) {
      throw Error("degenerate class " + std::to_string(target) + " (n_y=" + std::to_string(n_y) +
                  ", n=" + std::to_string(n) + ")");
    }
  }

  Ratio weight(bool positive) const { return imbalance_weight(positive, n_y, n); }

  /// Keeps only the given (ascending) example rows in the sums.
  BinaryView restricted_to(std::span<const std::size_t> rows) const {
    BinaryView bv = *this;
    bv.positives.clear();
    bv.negatives.clear();
    bv.members.assign(rows.begin(), rows.end());
    for (std::size_t i : rows) (is_positive[i] ? bv.positives : bv.negatives).push_back(i);
    return bv;
  }

  /// Binary labels flipped: positives become negatives and vice versa.
  BinaryView swapped() const {
    BinaryView bv = *this;
    for (auto& p : bv.is_positive) p = !p;
    std::swap(bv.positives, bv.negatives);
    bv.n_y = n - n_y;
    return bv;
  }
};

}  // namespace petal
