#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "senseprobe/common.hpp"
#include "senseprobe/corpus.hpp"

namespace senseprobe {

// Corpus vocabulary sorted by descending frequency, ties broken
// lexicographically. Word indices are stable across save/load because
// the word2vec text format preserves line order.
struct Vocabulary {
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::uint64_t min_count = 1;
  std::uint64_t total_tokens = 0;  // sum of retained counts

  std::unordered_map<std::string, std::int32_t> index;

  std::int32_t size() const { return static_cast<std::int32_t>(words.size()); }

  std::optional<std::int32_t> id_of(const std::string& w) const {
    auto it = index.find(w);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  void rebuild_index() {
    index.clear();
    index.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      index.emplace(words[i], static_cast<std::int32_t>(i));
    }
  }
};

inline Vocabulary build_vocab(const TokenStream& stream, std::uint64_t min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  std::size_t seen = 0;
  for (const auto& sent : stream.sentences) {
    for (const auto& tok : sent) {
      ++freq[tok];
      ++seen;
    }
  }
  if (seen == 0) throw std::runtime_error("empty corpus");

  Vocabulary v;
  v.min_count = min_count;
  for (const auto& [word, n] : freq) {
    if (n >= min_count) {
      v.words.push_back(word);
      v.counts.push_back(n);
    }
  }
  if (v.words.empty()) throw std::runtime_error("empty vocabulary after min_count filter");

  std::vector<std::size_t> order(v.words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (v.counts[a] != v.counts[b]) return v.counts[a] > v.counts[b];
    return v.words[a] < v.words[b];
  });
  Vocabulary sorted;
  sorted.min_count = min_count;
  sorted.words.reserve(v.words.size());
  sorted.counts.reserve(v.counts.size());
  for (std::size_t i : order) {
    sorted.words.push_back(std::move(v.words[i]));
    sorted.counts.push_back(v.counts[i]);
    sorted.total_tokens += v.counts[i];
  }
  sorted.rebuild_index();
  return sorted;
}

enum class EmbeddingMode { Skip, Sskip, Imported };

inline const char* to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::Skip: return "skip";
    case EmbeddingMode::Sskip: return "sskip";
    default: return "imported";
  }
}

// Vocabulary plus dense vectors. input holds the |V| x dim word vectors
// that are saved and consumed downstream; output blocks exist only on
// freshly trained tables (one for Skip, 2*window for Sskip).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(Vocabulary vocab, int dim, EmbeddingMode mode, int window = 0)
      : vocab_(std::move(vocab)), dim_(dim), mode_(mode), window_(window) {
    if (dim <= 0) throw std::invalid_argument("dim must be positive");
    input_.assign(static_cast<std::size_t>(vocab_.size()) * static_cast<std::size_t>(dim), 0.0f);
    int blocks = mode == EmbeddingMode::Skip ? 1
                 : mode == EmbeddingMode::Sskip ? 2 * window
                                                : 0;
    output_.assign(static_cast<std::size_t>(blocks), {});
    for (auto& b : output_) b.assign(input_.size(), 0.0f);
  }

  const Vocabulary& vocab() const { return vocab_; }
  int dim() const { return dim_; }
  EmbeddingMode mode() const { return mode_; }
  int window() const { return window_; }
  int output_block_count() const { return static_cast<int>(output_.size()); }

  std::span<float> row(std::int32_t i) {
    return {input_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  std::span<const float> row(std::int32_t i) const {
    return {input_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }

  std::span<float> output_row(int block, std::int32_t i) {
    auto& b = output_.at(static_cast<std::size_t>(block));
    return {b.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  std::span<const float> output_row(int block, std::int32_t i) const {
    const auto& b = output_.at(static_cast<std::size_t>(block));
    return {b.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }

  std::optional<std::span<const float>> vector_of(const std::string& word) const {
    auto id = vocab_.id_of(word);
    if (!id) return std::nullopt;
    return row(*id);
  }

  bool all_finite() const {
    for (float x : input_) {
      if (!std::isfinite(x)) return false;
    }
    for (const auto& b : output_) {
      for (float x : b) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }

  // Digest over words and input vectors; used in report fingerprints.
  std::uint64_t content_hash() const {
    std::uint64_t h = fnv1a64(std::to_string(dim_));
    for (const auto& w : vocab_.words) h = fnv1a64(w, h);
    h = fnv1a64(input_.data(), input_.size() * sizeof(float), h);
    return h;
  }

  // word2vec text format: "<n> <dim>" header, then one word per line.
  // %.9g round-trips binary32 exactly.
  void save_word2vec(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings: " + path);
    out << vocab_.size() << " " << dim_ << "\n";
    char buf[32];
    for (std::int32_t i = 0; i < vocab_.size(); ++i) {
      out << vocab_.words[static_cast<std::size_t>(i)];
      for (float x : row(i)) {
        std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(x));
        out << buf;
      }
      out << "\n";
    }
  }

  static EmbeddingTable load_word2vec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embeddings: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    long long n = 0, dim = 0;
    {
      std::istringstream hdr(line);
      if (!(hdr >> n >> dim) || n <= 0 || dim <= 0) {
        throw ParseError("malformed header '" + line + "'", 1);
      }
    }
    Vocabulary vocab;
    vocab.words.reserve(static_cast<std::size_t>(n));
    vocab.counts.assign(static_cast<std::size_t>(n), 0);
    EmbeddingTable table;
    table.vocab_ = std::move(vocab);
    table.dim_ = static_cast<int>(dim);
    table.mode_ = EmbeddingMode::Imported;
    table.input_.reserve(static_cast<std::size_t>(n * dim));

    std::size_t line_no = 1;
    std::string word;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      if (!(ls >> word)) throw ParseError("missing word", line_no);
      table.vocab_.words.push_back(word);
      for (long long d = 0; d < dim; ++d) {
        std::string field;
        if (!(ls >> field)) {
          throw ParseError("expected " + std::to_string(dim) + " values for '" +
                               word + "'", line_no);
        }
        char* endp = nullptr;
        float v = std::strtof(field.c_str(), &endp);
        if (endp == field.c_str() || *endp != '\0' || !std::isfinite(v)) {
          throw ParseError("non-numeric field '" + field + "'", line_no);
        }
        table.input_.push_back(v);
      }
      std::string extra;
      if (ls >> extra) throw ParseError("trailing field '" + extra + "'", line_no);
    }
    if (table.vocab_.words.size() != static_cast<std::size_t>(n)) {
      throw std::runtime_error("header/word-count mismatch: header says " +
                               std::to_string(n) + ", file has " +
                               std::to_string(table.vocab_.words.size()));
    }
    table.vocab_.counts.assign(table.vocab_.words.size(), 0);
    table.vocab_.rebuild_index();
    return table;
  }

 private:
  Vocabulary vocab_;
  int dim_ = 0;
  EmbeddingMode mode_ = EmbeddingMode::Imported;
  int window_ = 0;
  std::vector<float> input_;
  std::vector<std::vector<float>> output_;

  friend class SgnsTrainer;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

inline double l2_norm(std::span<const float> a) {
  return std::sqrt(dot(a, a));
}

// Cosine similarity; returns -2 (below any real cosine) when either
// vector has zero norm, so degenerate rows sort last in neighbor scans.
inline double cosine(std::span<const float> a, std::span<const float> b) {
  double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return -2.0;
  return dot(a, b) / (na * nb);
}

}  // namespace senseprobe
