#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "petal/matrix_io.hpp"
#include "petal/probability.hpp"
#include "petal/search.hpp"

namespace petal {

struct PatternReport {
  std::string pattern_id;
  double accuracy = 0.0;
  std::size_t correct = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

struct EvalReport {
  std::vector<PatternReport> patterns;
  /// Correct predictions over all (pattern, example) pairs.
  double pooled_accuracy = 0.0;
};

/// Classifies every example of every matrix by the argmax of the
/// multi-verbalizer distribution (ties to the lowest label). `verbalizers`
/// holds either one multi-verbalizer shared by all matrices or one per matrix.
inline EvalReport evaluate(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                           std::span<const MultiVerbalizer> verbalizers, unsigned threads = 1) {
  if (matrices.empty()) throw Error("at least one logit matrix is required");
  if (verbalizers.empty()) throw Error("empty multi-verbalizer list");
  if (verbalizers.size() != 1 && verbalizers.size() != matrices.size()) {
    throw Error("need one verbalizer, or one per matrix (" + std::to_string(matrices.size()) + ")");
  }
  const std::size_t k = data.num_classes();
  for (std::size_t p = 0; p < matrices.size(); ++p) {
    check_alignment(matrices[p], data);
    const auto& mv = verbalizers.size() == 1 ? verbalizers[0] : verbalizers[p];
    if (mv.num_classes() != k) {
      throw Error("verbalizer has " + std::to_string(mv.num_classes()) + " labels but the data has k=" +
                  std::to_string(k));
    }
    mv.validate(matrices[p].vocab_size);
  }

  EvalReport report;
  std::size_t total_correct = 0;
  for (std::size_t p = 0; p < matrices.size(); ++p) {
    const auto& m = matrices[p];
    const auto& mv = verbalizers.size() == 1 ? verbalizers[0] : verbalizers[p];
    std::vector<Label> predicted(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) { predicted[i] = multi_class_probs(m.row(i), mv).argmax(); });

    PatternReport pr;
    pr.pattern_id = m.pattern_id;
    pr.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < data.size(); ++i) {
      ++pr.confusion[data[i]][predicted[i]];
      if (predicted[i] == data[i]) ++pr.correct;
    }
    pr.accuracy = data.size() == 0 ? 0.0 : static_cast<double>(pr.correct) / static_cast<double>(data.size());
    total_correct += pr.correct;
    report.patterns.push_back(std::move(pr));
  }
  const std::size_t total = data.size() * matrices.size();
  report.pooled_accuracy = total == 0 ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(total);
  return report;
}

inline EvalReport evaluate(std::span<const LogitMatrix> matrices, const LabeledExamples& data,
                           const MultiVerbalizer& mv, unsigned threads = 1) {
  return evaluate(matrices, data, std::span<const MultiVerbalizer>(&mv, 1), threads);
}

inline std::string format_accuracy(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", a);
  return buf;
}

/// "pattern_id\taccuracy" table, a "pooled" line, and optionally one
/// "confusion\t<pattern_id>" block of k tab-separated rows per pattern.
inline void write_eval_report(const EvalReport& report, std::ostream& out, bool confusion = false) {
  std::string text = "pattern_id\taccuracy\n";
  for (const auto& p : report.patterns) text += p.pattern_id + "\t" + format_accuracy(p.accuracy) + "\n";
  text += "pooled\t" + format_accuracy(report.pooled_accuracy) + "\n";
  if (confusion) {
    for (const auto& p : report.patterns) {
      text += "confusion\t" + p.pattern_id + "\n";
      for (const auto& row : p.confusion) {
        for (std::size_t c = 0; c < row.size(); ++c) text += (c ? "\t" : "") + std::to_string(row[c]);
        text += "\n";
      }
    }
  }
  detail::emit(out, text);
}

// ------------------------------------------------------------------ n_v sweep

inline const std::vector<std::size_t> kDefaultSweepValues = {1, 3, 5, 10, 25, 50, 100};

struct SweepPoint {
  std::size_t n_v = 0;
  double accuracy = 0.0;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

/// Searches on the training matrices once, then for each n_v truncates the
/// rankings and scores the resulting verbalizer(s) on the held-out matrices.
/// In Separate mode held-out matrix p is scored with the verbalizer of
/// training matrix p.
inline std::vector<SweepPoint> sweep_nv(std::span<const LogitMatrix> train, const LabeledExamples& train_data,
                                        const VocabTable& vocab, SearchConfig cfg,
                                        std::span<const LogitMatrix> held_out, const LabeledExamples& held_out_data,
                                        std::span<const std::size_t> nv_values) {
  if (nv_values.empty()) throw Error("empty n_v list");
  std::size_t largest = 0;
  for (std::size_t n_v : nv_values) {
    if (n_v == 0) throw Error("n_v must be at least 1");
    largest = std::max(largest, n_v);
  }
  if (cfg.mode == SearchMode::Separate && held_out.size() != train.size()) {
    throw Error("separate mode needs one held-out matrix per training matrix");
  }
  if (held_out_data.num_classes() != train_data.num_classes()) {
    throw Error("held-out labels have a different number of classes");
  }
  cfg.n_v = largest;
  const auto groups = prepare_search(train, train_data, vocab, cfg);

  std::vector<SweepPoint> points;
  for (std::size_t n_v : nv_values) {
    std::vector<MultiVerbalizer> mvs;
    for (const auto& g : groups) mvs.push_back(assemble_verbalizer(g, n_v, cfg.distinct));
    const auto report = evaluate(held_out, held_out_data, mvs, cfg.threads);
    points.push_back(SweepPoint{n_v, report.pooled_accuracy});
  }
  return points;
}

inline void write_sweep(std::span<const SweepPoint> points, std::ostream& out) {
  std::string text = "# accuracy of the verbalizer argmax classifier on held-out matrices (no finetuning)\n";
  text += "n_v\taccuracy\n";
  for (const auto& p : points) text += std::to_string(p.n_v) + "\t" + format_accuracy(p.accuracy) + "\n";
  detail::emit(out, text);
}

}  // namespace petal
