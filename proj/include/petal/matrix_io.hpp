#pragma once

// Readers and writers for the files exchanged with the logit exporter:
//
//   logit matrix  binary, little-endian:
//                 "PLMX" | u32 version=1 | u32 vocab_size | u32 num_examples |
//                 u32 pattern_id_len | pattern_id bytes | f32 payload (row-major)
//   labels        text: k, then one label per line (line i+1 = row i)
//   vocabulary    text: id \t surface \t frequency \t word_initial(0/1)
//   verbalizer    text: "k=<k>\tn_v=<n_v>", then
//                 label \t rank \t token \t surface \t loss(9 sig. digits)

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "petal/error.hpp"
#include "petal/types.hpp"

namespace petal {

inline constexpr std::array<char, 4> kMatrixMagic = {'P', 'L', 'M', 'X'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixFixedHeaderBytes = 20;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t j = 1; j < len; ++j) {
      const auto cc = static_cast<unsigned char>(s[i + j]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Splits text into LF-terminated lines; a missing final newline is accepted.
inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

inline std::string slurp(std::istream& in) {
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw Error("read failure");
  return data;
}

inline void emit(std::ostream& out, const std::string& bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error("write failure");
}

inline std::string line_error(std::size_t line_no, const std::string& msg) {
  return "line " + std::to_string(line_no) + ": " + msg;
}

}  // namespace detail

// ---------------------------------------------------------------- matrices

/// Serializes the matrix; the matrix is validated before any byte is written.
inline void write_logit_matrix(const LogitMatrix& m, std::ostream& out) {
  m.validate();
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (m.vocab_size > kMax || m.num_examples > kMax || m.pattern_id.size() > kMax) {
    throw Error("matrix dimensions exceed the 32-bit header fields");
  }
  if (!detail::valid_utf8(m.pattern_id)) throw Error("pattern_id is not valid UTF-8");

  std::string bytes;
  bytes.reserve(kMatrixFixedHeaderBytes + m.pattern_id.size() + 4 * m.scores.size());
  bytes.append(kMatrixMagic.data(), kMatrixMagic.size());
  detail::put_u32(bytes, kMatrixVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(m.vocab_size));
  detail::put_u32(bytes, static_cast<std::uint32_t>(m.num_examples));
  detail::put_u32(bytes, static_cast<std::uint32_t>(m.pattern_id.size()));
  bytes += m.pattern_id;
  for (float s : m.scores) detail::put_u32(bytes, std::bit_cast<std::uint32_t>(s));
  detail::emit(out, bytes);
}

/// Parses and validates a matrix from an in-memory image of the file.
inline LogitMatrix parse_logit_matrix(std::string_view data) {
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() < kMatrixFixedHeaderBytes) throw Error("truncated header");
  if (std::memcmp(p, kMatrixMagic.data(), kMatrixMagic.size()) != 0) throw Error("bad magic");
  const std::uint32_t version = detail::get_u32(p + 4);
  if (version != kMatrixVersion) {
    throw Error("unsupported version " + std::to_string(version));
  }

  LogitMatrix m;
  m.vocab_size = detail::get_u32(p + 8);
  m.num_examples = detail::get_u32(p + 12);
  const std::size_t id_len = detail::get_u32(p + 16);
  if (m.vocab_size == 0) throw Error("vocab_size must be positive");
  if (id_len > data.size() - kMatrixFixedHeaderBytes) throw Error("truncated header");
  m.pattern_id.assign(data.substr(kMatrixFixedHeaderBytes, id_len));
  if (!detail::valid_utf8(m.pattern_id)) throw Error("pattern_id is not valid UTF-8");

  const std::size_t payload_offset = kMatrixFixedHeaderBytes + id_len;
  const std::size_t available = data.size() - payload_offset;
  // num_examples * vocab_size * 4 can exceed 64 bits only through corrupt
  // headers; compare by division first.
  if (m.num_examples > available / 4 / m.vocab_size) throw Error("truncated payload");
  const std::size_t count = m.num_examples * m.vocab_size;
  if (count * 4 != available) throw Error("trailing bytes after payload");

  m.scores.resize(count);
  const unsigned char* payload = p + payload_offset;
  for (std::size_t i = 0; i < count; ++i) {
    const float s = std::bit_cast<float>(detail::get_u32(payload + 4 * i));
    if (!std::isfinite(s)) throw Error("non-finite score");
    m.scores[i] = s;
  }
  return m;
}

inline LogitMatrix read_logit_matrix(std::istream& in) {
  return parse_logit_matrix(detail::slurp(in));
}

// ------------------------------------------------------------------ labels

inline void write_labels(const LabeledExamples& data, std::ostream& out) {
  std::string text = std::to_string(data.num_classes()) + "\n";
  for (Label y : data.labels()) text += std::to_string(y) + "\n";
  detail::emit(out, text);
}

inline LabeledExamples parse_labels(std::string_view text) {
  const auto lines = detail::lines_of(text);
  if (lines.empty()) throw Error("labels file is empty");
  long long k = 0;
  if (!detail::parse_int(lines[0], k)) throw Error(detail::line_error(1, "malformed class count"));
  if (k <= 0) throw Error("k must be positive");
  std::vector<Label> labels;
  labels.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    long long y = 0;
    if (!detail::parse_int(lines[i], y)) throw Error(detail::line_error(i + 1, "malformed label"));
    if (y < 0 || y >= k) {
      throw Error("label " + std::to_string(y) + " out of range for k=" + std::to_string(k));
    }
    labels.push_back(static_cast<Label>(y));
  }
  return LabeledExamples(static_cast<std::size_t>(k), std::move(labels));
}

inline LabeledExamples read_labels(std::istream& in) { return parse_labels(detail::slurp(in)); }

/// Rows of the matrix and lines of the labels file must pair up one to one.
inline void check_alignment(const LogitMatrix& m, const LabeledExamples& data) {
  if (m.num_examples != data.size()) {
    throw Error("matrix '" + m.pattern_id + "' has " + std::to_string(m.num_examples) +
                " examples but the labels file has " + std::to_string(data.size()));
  }
}

// -------------------------------------------------------------- vocabulary

inline void write_vocab(const VocabTable& vocab, std::ostream& out) {
  std::string text;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    const auto& e = vocab.entries[t];
    if (e.surface.find_first_of("\t\n") != std::string::npos) {
      throw Error("surface of token " + std::to_string(t) + " contains a tab or newline");
    }
    text += std::to_string(t) + "\t" + e.surface + "\t" + std::to_string(e.frequency) + "\t" +
            (e.word_initial ? "1" : "0") + "\n";
  }
  detail::emit(out, text);
}

inline VocabTable parse_vocab(std::string_view text) {
  VocabTable vocab;
  const auto lines = detail::lines_of(text);
  vocab.entries.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = detail::split(lines[i], '\t');
    if (fields.size() != 4) throw Error(detail::line_error(i + 1, "expected 4 tab-separated fields"));
    std::uint64_t id = 0;
    if (!detail::parse_int(fields[0], id)) throw Error(detail::line_error(i + 1, "malformed token id"));
    if (id != i) throw Error("non-dense token ids");
    if (!fields[2].empty() && fields[2][0] == '-') throw Error("negative frequency");
    VocabEntry e;
    if (!detail::parse_int(fields[2], e.frequency)) {
      throw Error(detail::line_error(i + 1, "malformed frequency"));
    }
    if (fields[3] == "1") {
      e.word_initial = true;
    } else if (fields[3] != "0") {
      throw Error(detail::line_error(i + 1, "word_initial must be 0 or 1"));
    }
    if (!detail::valid_utf8(fields[1])) throw Error(detail::line_error(i + 1, "surface is not valid UTF-8"));
    e.surface.assign(fields[1]);
    vocab.entries.push_back(std::move(e));
  }
  return vocab;
}

inline VocabTable read_vocab(std::istream& in) { return parse_vocab(detail::slurp(in)); }

// -------------------------------------------------------------- verbalizer

inline std::string format_loss(double loss) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", loss);
  return buf;
}

inline void write_verbalizer(const MultiVerbalizer& mv, const VocabTable& vocab, std::ostream& out) {
  mv.validate(vocab.size());
  std::string text = "k=" + std::to_string(mv.num_classes()) +
                     "\tn_v=" + std::to_string(mv.max_list_size()) + "\n";
  for (std::size_t y = 0; y < mv.num_classes(); ++y) {
    const auto& list = mv.per_label[y];
    for (std::size_t rank = 0; rank < list.size(); ++rank) {
      text += std::to_string(y) + "\t" + std::to_string(rank) + "\t" +
              std::to_string(list[rank].token) + "\t" + vocab[list[rank].token].surface + "\t" +
              format_loss(list[rank].loss) + "\n";
    }
  }
  detail::emit(out, text);
}

inline MultiVerbalizer parse_verbalizer(std::string_view text) {
  const auto lines = detail::lines_of(text);
  if (lines.empty()) throw Error("verbalizer file is empty");
  const auto header = detail::split(lines[0], '\t');
  std::size_t k = 0;
  std::size_t n_v = 0;
  if (header.size() != 2 || !header[0].starts_with("k=") || !header[1].starts_with("n_v=") ||
      !detail::parse_int(header[0].substr(2), k) || !detail::parse_int(header[1].substr(4), n_v) ||
      k == 0) {
    throw Error(detail::line_error(1, "malformed verbalizer header"));
  }

  MultiVerbalizer mv;
  mv.per_label.resize(k);
  std::size_t expected_label = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::split(lines[i], '\t');
    std::size_t label = 0;
    std::size_t rank = 0;
    TokenId token = 0;
    if (fields.size() != 5 || !detail::parse_int(fields[0], label) ||
        !detail::parse_int(fields[1], rank) || !detail::parse_int(fields[2], token)) {
      throw Error(detail::line_error(i + 1, "malformed verbalizer row"));
    }
    const std::string loss_text(fields[4]);
    char* end = nullptr;
    const double loss = std::strtod(loss_text.c_str(), &end);
    if (loss_text.empty() || end != loss_text.c_str() + loss_text.size() || !std::isfinite(loss)) {
      throw Error(detail::line_error(i + 1, "malformed loss"));
    }
    if (label >= k) throw Error(detail::line_error(i + 1, "label out of range"));
    if (label < expected_label) throw Error(detail::line_error(i + 1, "rows not sorted by label"));
    expected_label = label;
    auto& list = mv.per_label[label];
    if (rank != list.size()) throw Error(detail::line_error(i + 1, "ranks must be consecutive from 0"));
    if (!list.empty() && loss < list.back().loss) {
      throw Error(detail::line_error(i + 1, "losses must be non-decreasing within a label"));
    }
    list.push_back(TokenLoss{token, loss});
  }
  for (std::size_t y = 0; y < k; ++y) {
    if (mv.per_label[y].empty()) throw Error("no verbalizations for label " + std::to_string(y));
  }
  if (mv.max_list_size() != n_v) throw Error("n_v in header does not match the rows");
  mv.validate(std::numeric_limits<std::size_t>::max());
  return mv;
}

inline MultiVerbalizer read_verbalizer(std::istream& in) {
  return parse_verbalizer(detail::slurp(in));
}

}  // namespace petal
