#pragma once

// Command-line front end. run() is the whole program so tests can drive it
// in-process; exit codes: 0 success, 1 internal error, 2 usage/input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "petal/petal.hpp"

namespace petal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

namespace detail {

inline std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + what + " '" + path + "'");
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw Error("cannot read " + what + " '" + path + "'");
  return data;
}

inline LogitMatrix load_matrix(const std::string& path) {
  const std::string data = read_file(path, "logit matrix");
  try {
    return parse_logit_matrix(data);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline std::vector<LogitMatrix> load_matrices(const std::vector<std::string>& paths) {
  std::vector<LogitMatrix> out;
  for (const auto& p : paths) out.push_back(load_matrix(p));
  return out;
}

template <typename Parse>
auto load_text(const std::string& path, const std::string& what, Parse parse) {
  const std::string data = read_file(path, what);
  try {
    return parse(data);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline LabeledExamples load_labels(const std::string& path) { return load_text(path, "labels", parse_labels); }
inline VocabTable load_vocab(const std::string& path) { return load_text(path, "vocabulary", parse_vocab); }
inline MultiVerbalizer load_verbalizer(const std::string& path) {
  return load_text(path, "verbalizer", parse_verbalizer);
}

/// Buffers every output and publishes them together by renaming temporary
/// siblings into place, so a failed command leaves no partial files.
class OutputSet {
 public:
  OutputSet() = default;
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    for (const auto& t : temps_) std::filesystem::remove(t);
  }

  void add(const std::string& path, std::string bytes) {
    if (contents_.contains(path)) throw Error("two outputs map to the same path '" + path + "'");
    contents_.emplace(path, std::move(bytes));
  }

  void commit() {
    for (const auto& [path, bytes] : contents_) {
      const std::string temp = path + ".tmp." + std::to_string(::getpid());
      temps_.push_back(temp);
      std::ofstream out(temp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.close();
      if (!out) throw Error("cannot write '" + path + "'");
    }
    std::size_t i = 0;
    for (const auto& [path, bytes] : contents_) {
      std::error_code ec;
      std::filesystem::rename(temps_[i++], path, ec);
      if (ec) throw Error("cannot write '" + path + "': " + ec.message());
    }
    temps_.clear();
  }

 private:
  std::map<std::string, std::string> contents_;
  std::vector<std::string> temps_;
};

inline std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out.empty() ? "_" : out;
}

template <typename Writer>
std::string render(Writer&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

inline std::vector<std::size_t> parse_nv_list(const std::string& text) {
  std::vector<std::size_t> values;
  if (text.empty()) throw Error("empty n_v list");
  for (auto part : petal::detail::split(text, ',')) {
    std::size_t v = 0;
    if (!petal::detail::parse_int(part, v) || v == 0) {
      throw Error("invalid n_v value '" + std::string(part) + "'");
    }
    values.push_back(v);
  }
  return values;
}

struct SearchFlags {
  std::string mode = "joint";
  std::size_t n_v = kDefaultVerbalizationsPerLabel;
  std::string objective = "lr";
  bool distinct = false;
  std::size_t max_filtered = kDefaultMaxFiltered;
  std::size_t max_candidates = kDefaultMaxCandidates;
  std::string pooling = "summed";
  bool no_alpha_only = false;
  unsigned threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "sep: one verbalizer per pattern; joint: losses summed over patterns")
        ->check(CLI::IsMember({"sep", "joint"}))
        ->capture_default_str();
    cmd->add_option("--objective", objective, "token objective")
        ->check(CLI::IsMember({"lr", "ce"}))
        ->capture_default_str();
    cmd->add_flag("--distinct", distinct, "never reuse a token for a later label");
    cmd->add_option("--max-filtered", max_filtered, "size cap of the filtered vocabulary")->capture_default_str();
    cmd->add_option("--max-candidates", max_candidates, "candidates kept per label")->capture_default_str();
    cmd->add_option("--pooling", pooling, "how patterns combine during candidate selection")
        ->check(CLI::IsMember({"summed", "per-pattern"}))
        ->capture_default_str();
    cmd->add_flag("--no-alpha-only", no_alpha_only, "allow non-letter characters in candidate words");
    cmd->add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
  }

  SearchConfig config() const {
    SearchConfig cfg;
    cfg.n_v = n_v;
    cfg.mode = mode == "sep" ? SearchMode::Separate : SearchMode::Joint;
    cfg.objective = objective == "ce" ? Objective::CrossEntropy : Objective::LikelihoodRatio;
    cfg.distinct = distinct;
    cfg.max_filtered = max_filtered;
    cfg.max_candidates = max_candidates;
    cfg.pooling = pooling == "per-pattern" ? CandidatePooling::PerPattern : CandidatePooling::Summed;
    cfg.word_predicate.alpha_only = !no_alpha_only;
    cfg.threads = resolve_threads(threads);
    return cfg;
  }
};

class Logger {
 public:
  Logger(std::ostream& err, const bool& enabled) : err_(err), enabled_(enabled) {}
  void operator()(const std::string& msg) const {
    if (enabled_) err_ << "[petal] " << msg << "\n";
  }

 private:
  std::ostream& err_;
  const bool& enabled_;
};

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Verbalizer search for cloze-style few-shot classification over precomputed logit matrices"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");
  const detail::Logger log(err, verbose);

  // filter-vocab
  std::string fv_vocab;
  std::string fv_out;
  std::size_t fv_max = kDefaultMaxFiltered;
  bool fv_no_alpha = false;
  auto* fv = app.add_subcommand("filter-vocab", "write the filtered vocabulary (id, surface)");
  fv->add_option("--vocab", fv_vocab, "vocabulary file")->required();
  fv->add_option("--max-filtered", fv_max, "keep at most this many tokens")->capture_default_str();
  fv->add_flag("--no-alpha-only", fv_no_alpha, "allow non-letter characters");
  fv->add_option("--out", fv_out, "output file (default: stdout)");

  // search
  std::vector<std::string> s_matrices;
  std::string s_labels;
  std::string s_vocab;
  std::string s_out;
  detail::SearchFlags s_flags;
  auto* search = app.add_subcommand("search", "find verbalizers");
  search->add_option("matrices", s_matrices, "logit matrix files, one per pattern")->required();
  search->add_option("--labels", s_labels, "labels file")->required();
  search->add_option("--vocab", s_vocab, "vocabulary file")->required();
  search->add_option("--nv", s_flags.n_v, "verbalizations per label")->capture_default_str();
  search->add_option("--out", s_out, "verbalizer file (sep mode appends .<pattern_id>)")->required();
  s_flags.attach(search);

  // eval
  std::vector<std::string> e_matrices;
  std::string e_labels;
  std::vector<std::string> e_verbalizers;
  bool e_confusion = false;
  unsigned e_threads = 0;
  auto* eval = app.add_subcommand("eval", "accuracy of verbalizers on labeled logit matrices");
  eval->add_option("matrices", e_matrices, "logit matrix files")->required();
  eval->add_option("--labels", e_labels, "labels file")->required();
  eval->add_option("--verbalizer", e_verbalizers, "verbalizer file; one shared or one per matrix")->required();
  eval->add_flag("--confusion", e_confusion, "append confusion matrices");
  eval->add_option("--threads", e_threads, "worker threads (0 = all cores)");

  // sweep
  std::vector<std::string> w_matrices;
  std::string w_labels;
  std::string w_vocab;
  std::vector<std::string> w_eval_matrices;
  std::string w_eval_labels;
  std::string w_nv_list = "1,3,5,10,25,50,100";
  std::string w_out;
  detail::SearchFlags w_flags;
  auto* sweep = app.add_subcommand("sweep", "held-out accuracy as a function of n_v");
  sweep->add_option("matrices", w_matrices, "training logit matrix files")->required();
  sweep->add_option("--labels", w_labels, "training labels file")->required();
  sweep->add_option("--vocab", w_vocab, "vocabulary file")->required();
  sweep->add_option("--eval-matrix", w_eval_matrices, "held-out logit matrix files")->required();
  sweep->add_option("--eval-labels", w_eval_labels, "held-out labels file")->required();
  sweep->add_option("--nv-list", w_nv_list, "comma-separated n_v values")->capture_default_str();
  sweep->add_option("--out", w_out, "output file (default: stdout)");
  w_flags.attach(sweep);

  // oracle
  std::vector<std::string> o_matrices;
  std::string o_labels;
  std::size_t o_per_label = 0;
  std::uint64_t o_cap = kDefaultEnumerationCap;
  auto* oracle = app.add_subcommand("oracle", "exact maximum-likelihood verbalizer by enumeration");
  oracle->add_option("matrices", o_matrices, "logit matrix files")->required();
  oracle->add_option("--labels", o_labels, "labels file")->required();
  oracle->add_option("--candidates-per-label", o_per_label,
                     "most likely tokens per label to enumerate (0 = whole vocabulary)")
      ->capture_default_str();
  oracle->add_option("--cap", o_cap, "maximum number of verbalizers to enumerate")->capture_default_str();

  // random
  std::string r_vocab;
  std::size_t r_k = 0;
  std::size_t r_nv = kDefaultVerbalizationsPerLabel;
  std::uint64_t r_seed = 0;
  std::size_t r_max = kDefaultMaxFiltered;
  bool r_no_alpha = false;
  std::string r_out;
  auto* random = app.add_subcommand("random", "random baseline verbalizer from the filtered vocabulary");
  random->add_option("--vocab", r_vocab, "vocabulary file")->required();
  random->add_option("--k", r_k, "number of labels")->required()->check(CLI::PositiveNumber);
  random->add_option("--nv", r_nv, "tokens per label")->capture_default_str();
  random->add_option("--seed", r_seed, "generator seed")->capture_default_str();
  random->add_option("--max-filtered", r_max, "size cap of the filtered vocabulary")->capture_default_str();
  random->add_flag("--no-alpha-only", r_no_alpha, "allow non-letter characters");
  random->add_option("--out", r_out, "verbalizer file")->required();

  // gen
  std::string g_kind = "planted";
  PlantedSpec g_spec;
  std::vector<TokenId> g_planted;
  TokenId g_confounder = 0;
  double g_confounder_boost = 5.0;
  std::string g_prefix;
  auto* gen = app.add_subcommand("gen", "write a synthetic matrix, labels and vocabulary");
  gen->add_option("--kind", g_kind, "fixture kind")
      ->check(CLI::IsMember({"planted", "confounder"}))
      ->capture_default_str();
  gen->add_option("--k", g_spec.k, "number of labels")->capture_default_str();
  gen->add_option("--per-class", g_spec.examples_per_class, "examples per class")->capture_default_str();
  gen->add_option("--vocab-size", g_spec.vocab_size, "vocabulary size")->capture_default_str();
  gen->add_option("--boost", g_spec.boost, "boost of planted tokens on their class rows")->capture_default_str();
  gen->add_option("--planted", g_planted, "planted token per label (default: drawn from the seed)")
      ->delimiter(',');
  gen->add_option("--seed", g_spec.seed, "generator seed")->capture_default_str();
  gen->add_option("--pattern-id", g_spec.pattern_id, "pattern id stored in the matrix")->capture_default_str();
  gen->add_option("--confounder", g_confounder, "confounder token (kind=confounder)");
  gen->add_option("--confounder-boost", g_confounder_boost, "constant confounder score")->capture_default_str();
  gen->add_option("--out-prefix", g_prefix, "writes <prefix>.plmx, <prefix>.labels, <prefix>.vocab")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    detail::OutputSet outputs;
    std::string stdout_text;

    if (*fv) {
      const VocabTable vocab = detail::load_vocab(fv_vocab);
      const auto kept = filter_vocab(vocab, fv_max, WordPredicate{!fv_no_alpha});
      if (kept.empty()) err << "warning: filtered vocabulary is empty\n";
      std::string text;
      for (TokenId t : kept) text += std::to_string(t) + "\t" + vocab[t].surface + "\n";
      if (fv_out.empty()) {
        stdout_text = std::move(text);
      } else {
        outputs.add(fv_out, std::move(text));
      }
    } else if (*search) {
      const auto matrices = detail::load_matrices(s_matrices);
      const auto data = detail::load_labels(s_labels);
      const auto vocab = detail::load_vocab(s_vocab);
      const SearchConfig cfg = s_flags.config();
      log("searching " + std::to_string(matrices.size()) + " matrices, k=" + std::to_string(data.num_classes()) +
          ", threads=" + std::to_string(cfg.threads));
      const auto mvs = find_verbalizer(matrices, data, vocab, cfg);
      if (cfg.mode == SearchMode::Joint) {
        outputs.add(s_out, detail::render([&](std::ostream& os) { write_verbalizer(mvs[0], vocab, os); }));
      } else {
        for (std::size_t p = 0; p < mvs.size(); ++p) {
          outputs.add(s_out + "." + detail::sanitize(matrices[p].pattern_id),
                      detail::render([&](std::ostream& os) { write_verbalizer(mvs[p], vocab, os); }));
        }
      }
    } else if (*eval) {
      const auto matrices = detail::load_matrices(e_matrices);
      const auto data = detail::load_labels(e_labels);
      std::vector<MultiVerbalizer> mvs;
      for (const auto& p : e_verbalizers) mvs.push_back(detail::load_verbalizer(p));
      const auto report = evaluate(matrices, data, mvs, resolve_threads(e_threads));
      stdout_text = detail::render([&](std::ostream& os) { write_eval_report(report, os, e_confusion); });
    } else if (*sweep) {
      const auto matrices = detail::load_matrices(w_matrices);
      const auto data = detail::load_labels(w_labels);
      const auto vocab = detail::load_vocab(w_vocab);
      const auto held_out = detail::load_matrices(w_eval_matrices);
      const auto held_out_data = detail::load_labels(w_eval_labels);
      const auto nv_values = detail::parse_nv_list(w_nv_list);
      const auto points = sweep_nv(matrices, data, vocab, w_flags.config(), held_out, held_out_data, nv_values);
      std::string text = detail::render([&](std::ostream& os) { write_sweep(points, os); });
      if (w_out.empty()) {
        stdout_text = std::move(text);
      } else {
        outputs.add(w_out, std::move(text));
      }
    } else if (*oracle) {
      const auto matrices = detail::load_matrices(o_matrices);
      const auto data = detail::load_labels(o_labels);
      const std::size_t vocab_size = matrices.front().vocab_size;
      for (const auto& m : matrices) {
        if (m.vocab_size != vocab_size) throw Error("matrices disagree on vocab_size");
      }
      std::vector<TokenId> all(vocab_size);
      for (std::size_t t = 0; t < vocab_size; ++t) all[t] = static_cast<TokenId>(t);
      std::vector<std::vector<TokenId>> candidates;
      if (o_per_label == 0 || o_per_label >= vocab_size) {
        candidates.assign(data.num_classes(), all);
      } else {
        std::vector<NormalizedScores> scores;
        for (const auto& m : matrices) scores.emplace_back(m);
        for (std::size_t y = 0; y < data.num_classes(); ++y) {
          candidates.push_back(label_candidates(scores, BinaryView::make(data, static_cast<Label>(y)), all, o_per_label));
        }
      }
      const OracleResult best = brute_force_mle(matrices, data, candidates, o_cap);
      std::string text = "label_id\ttoken_id\n";
      for (std::size_t y = 0; y < best.verbalizer.size(); ++y) {
        text += std::to_string(y) + "\t" + std::to_string(best.verbalizer[y]) + "\n";
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", best.log_likelihood);
      text += std::string("log_likelihood\t") + buf + "\n";
      stdout_text = std::move(text);
    } else if (*random) {
      const auto vocab = detail::load_vocab(r_vocab);
      const auto t_f = filter_vocab(vocab, r_max, WordPredicate{!r_no_alpha});
      const auto mv = random_verbalizer(t_f, r_k, r_nv, r_seed);
      outputs.add(r_out, detail::render([&](std::ostream& os) { write_verbalizer(mv, vocab, os); }));
    } else if (*gen) {
      g_spec.planted = g_planted.empty() ? choose_planted_tokens(g_spec.k, g_spec.vocab_size, g_spec.seed ^ 0x9E3779B97F4A7C15ULL)
                                         : g_planted;
      const Fixture f = g_kind == "confounder" ? gen_global_confounder(g_spec, g_confounder, g_confounder_boost)
                                               : gen_planted(g_spec);
      outputs.add(g_prefix + ".plmx", detail::render([&](std::ostream& os) { write_logit_matrix(f.matrix, os); }));
      outputs.add(g_prefix + ".labels", detail::render([&](std::ostream& os) { write_labels(f.data, os); }));
      outputs.add(g_prefix + ".vocab",
                  detail::render([&](std::ostream& os) { write_vocab(gen_vocab(g_spec.vocab_size), os); }));
      std::string text = "planted";
      for (TokenId t : g_spec.planted) text += "\t" + std::to_string(t);
      log(text);
    }

    outputs.commit();
    out << stdout_text;
    out.flush();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("petal");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace petal::cli
