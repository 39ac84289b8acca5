#pragma once

#include <span>
#include <vector>

#include "petal/matrix_io.hpp"
#include "petal/probability.hpp"

namespace petal {

/// Imbalance-weighted binary cross-entropy of using `token` as the
/// verbalization of bv.target:  -sum_i s(y~_i) log q(y~_i | x_i).
inline double ce_loss(const NormalizedScores& scores, TokenId token, const BinaryView& bv) {
  bv.require_non_degenerate();
  scores.check_token(token);
  const double s0 = bv.weight(false).to_double();
  double sum = 0.0;
  for (std::size_t i : bv.members) {
    const BinaryLogProb p = scores.binary(i, token);
    sum += bv.is_positive[i] ? p.log_q1 : s0 * p.log_q0;
  }
  return -sum;
}

/// Imbalance-weighted likelihood-ratio loss:
///   -sum_i s(y~_i) [log q(y~_i | x_i) - log q(1 - y~_i | x_i)].
/// Indifferent to how likely the token is overall; only the log-odds gap
/// between positives and negatives matters.
inline double lr_loss(const NormalizedScores& scores, TokenId token, const BinaryView& bv) {
  bv.require_non_degenerate();
  scores.check_token(token);
  const double s0 = bv.weight(false).to_double();
  double sum = 0.0;
  for (std::size_t i : bv.members) {
    const BinaryLogProb p = scores.binary(i, token);
    sum += bv.is_positive[i] ? p.log_q1 - p.log_q0 : s0 * (p.log_q0 - p.log_q1);
  }
  return -sum;
}

/// -sum over positives of log q(1 | x): lower means the token is more likely
/// at the mask on examples of the target label.
inline double positive_ce(const NormalizedScores& scores, TokenId token,
                          std::span<const std::size_t> positives) {
  if (positives.empty()) throw Error("empty positives");
  scores.check_token(token);
  double sum = 0.0;
  for (std::size_t i : positives) sum += scores.log_q1(i, token);
  return -sum;
}

inline double ce_loss(const LogitMatrix& m, TokenId token, const BinaryView& bv) {
  return ce_loss(NormalizedScores(m), token, bv);
}
inline double lr_loss(const LogitMatrix& m, TokenId token, const BinaryView& bv) {
  return lr_loss(NormalizedScores(m), token, bv);
}
inline double positive_ce(const LogitMatrix& m, TokenId token, std::span<const std::size_t> positives) {
  return positive_ce(NormalizedScores(m), token, positives);
}

namespace detail {

inline void check_verbalizer_inputs(std::span<const LogitMatrix> matrices, const Verbalizer& v,
                                    const LabeledExamples& data) {
  if (v.size() != data.num_classes()) {
    throw Error("missing label assignment: verbalizer covers " + std::to_string(v.size()) +
                " of " + std::to_string(data.num_classes()) + " labels");
  }
  for (const auto& m : matrices) check_alignment(m, data);
}

}  // namespace detail

/// Log-likelihood of the labeled data under the k-way softmax over the
/// verbalization tokens, summed over patterns (in order) and examples.
inline double mle_log_likelihood(std::span<const LogitMatrix> matrices, const Verbalizer& v,
                                 const LabeledExamples& data) {
  detail::check_verbalizer_inputs(matrices, v, data);
  double total = 0.0;
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::vector<double> values = verbalizer_scores(m.row(i), v);
      const double own = values[data[i]];
      for (double& x : values) x -= own;
      total -= log_sum_exp(std::span<const double>(values));
    }
  }
  return total;
}

/// -sum_(x,y) [M(v_y) - mean_{y' != y} M(v_y')]: the margin to the average
/// competing verbalization, which per-label LR search approximately minimizes
/// on balanced data.
inline double avg_margin_objective(std::span<const LogitMatrix> matrices, const Verbalizer& v,
                                   const LabeledExamples& data) {
  detail::check_verbalizer_inputs(matrices, v, data);
  const std::size_t k = v.size();
  if (k < 2) throw Error("average margin needs at least two labels");
  double total = 0.0;
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::vector<double> values = verbalizer_scores(m.row(i), v);
      const Label y = data[i];
      double others = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (c != y) others += values[c];
      }
      total += values[y] - others / static_cast<double>(k - 1);
    }
  }
  return -total;
}

/// -sum_(x,y) [M(v_y) - max_y' M(v_y')]: the hard-max limit of the negative
/// log-likelihood.
inline double max_margin_objective(std::span<const LogitMatrix> matrices, const Verbalizer& v,
                                   const LabeledExamples& data) {
  detail::check_verbalizer_inputs(matrices, v, data);
  double total = 0.0;
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::vector<double> values = verbalizer_scores(m.row(i), v);
      total += values[data[i]] - *std::max_element(values.begin(), values.end());
    }
  }
  return -total;
}

/// Sum over labels and patterns of lr_loss(v_y) on each label's binary view.
inline double summed_lr_loss(std::span<const NormalizedScores> scores, const Verbalizer& v,
                             const LabeledExamples& data) {
  if (v.size() != data.num_classes()) throw Error("missing label assignment");
  double total = 0.0;
  for (std::size_t y = 0; y < v.size(); ++y) {
    const BinaryView bv = BinaryView::make(data, static_cast<Label>(y));
    for (const auto& s : scores) total += lr_loss(s, v[y], bv);
  }
  return total;
}

}  // namespace petal
