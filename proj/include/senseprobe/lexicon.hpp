#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "senseprobe/corpus.hpp"
#include "senseprobe/inventory.hpp"

namespace senseprobe {

// Per-word map from S-class to mention count, aggregated over every
// annotated mention of the word's surface form. Ordered maps keep all
// derived files deterministic.
class SenseLexicon {
 public:
  using ClassCounts = std::map<ClassId, std::uint64_t>;

  void add(const std::string& word, ClassId cls, std::uint64_t n = 1) {
    entries_[word][cls] += n;
  }

  bool has(const std::string& word) const { return entries_.count(word) > 0; }

  bool has(const std::string& word, ClassId cls) const {
    auto it = entries_.find(word);
    return it != entries_.end() && it->second.count(cls) > 0;
  }

  std::uint64_t count(const std::string& word, ClassId cls) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) {
      throw std::invalid_argument("word not in lexicon: " + word);
    }
    auto jt = it->second.find(cls);
    if (jt == it->second.end()) {
      throw std::invalid_argument("class " + std::to_string(cls) +
                                  " not in lexicon for word: " + word);
    }
    return jt->second;
  }

  // Total (mention, class) pairs for the word.
  std::uint64_t total(const std::string& word) const {
    std::uint64_t t = 0;
    for (const auto& [cls, n] : classes(word)) t += n;
    return t;
  }

  const ClassCounts& classes(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) {
      throw std::invalid_argument("word not in lexicon: " + word);
    }
    return it->second;
  }

  std::size_t num_classes(const std::string& word) const {
    return classes(word).size();
  }

  // Fraction of the word's counted pairs labeled with cls.
  double dominance(const std::string& word, ClassId cls) const {
    std::uint64_t c = count(word, cls);
    return static_cast<double>(c) / static_cast<double>(total(word));
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void erase(const std::string& word) { entries_.erase(word); }

  void merge(const SenseLexicon& other) {
    for (const auto& [word, counts] : other.entries_) {
      for (const auto& [cls, n] : counts) add(word, cls, n);
    }
  }

  // word<TAB>class:count,class:count
  void save_tsv(const std::string& path, const ClassInventory& inv) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write lexicon: " + path);
    for (const auto& [word, counts] : entries_) {
      out << word << "\t";
      bool first = true;
      for (const auto& [cls, n] : counts) {
        if (!first) out << ",";
        out << inv.name(cls) << ":" << n;
        first = false;
      }
      out << "\n";
    }
  }

  static SenseLexicon load_tsv(const std::string& path,
                               const ClassInventory& inv) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon: " + path);
    SenseLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw ParseError("expected word<TAB>counts", line_no);
      for (const auto& item : split(cols[1], ',')) {
        auto sep = item.rfind(':');
        if (sep == std::string::npos) {
          throw ParseError("malformed class:count entry '" + item + "'", line_no);
        }
        ClassId cls = inv.require(item.substr(0, sep));
        std::uint64_t n = 0;
        try {
          n = std::stoull(item.substr(sep + 1));
        } catch (const std::exception&) {
          throw ParseError("malformed count in '" + item + "'", line_no);
        }
        if (n == 0) throw ParseError("zero count in '" + item + "'", line_no);
        lex.add(cols[0], cls, n);
      }
    }
    return lex;
  }

 private:
  std::map<std::string, ClassCounts> entries_;
};

// Accumulates mention statistics over a sentence stream; shardable via
// merge(). The min-frequency rule applies to the word's mention count
// (the corpus frequency of its "@"-token), not to per-class totals.
class LexiconBuilder {
 public:
  explicit LexiconBuilder(bool lowercase = true) : lowercase_(lowercase) {}

  void observe(const AnnotatedSentence& s) {
    for (const auto& m : s.mentions) {
      std::string word = mention_token(s, m, lowercase_);
      mention_count_[word] += 1;
      for (ClassId c : detail::sorted_classes(m)) lexicon_.add(word, c);
    }
  }

  void merge(const LexiconBuilder& other) {
    lexicon_.merge(other.lexicon_);
    for (const auto& [w, n] : other.mention_count_) mention_count_[w] += n;
  }

  std::uint64_t mention_count(const std::string& word) const {
    auto it = mention_count_.find(word);
    return it == mention_count_.end() ? 0 : it->second;
  }

  SenseLexicon finish(std::uint64_t min_word_freq) const {
    if (min_word_freq < 1) throw std::invalid_argument("min_word_freq must be >= 1");
    SenseLexicon out = lexicon_;
    for (const auto& [word, n] : mention_count_) {
      if (n < min_word_freq) out.erase(word);
    }
    return out;
  }

 private:
  bool lowercase_;
  SenseLexicon lexicon_;
  std::map<std::string, std::uint64_t> mention_count_;
};

inline SenseLexicon build_sense_lexicon(const std::vector<AnnotatedSentence>& stream,
                                        std::uint64_t min_word_freq,
                                        bool lowercase = true) {
  LexiconBuilder builder(lowercase);
  for (const auto& s : stream) builder.observe(s);
  return builder.finish(min_word_freq);
}

}  // namespace senseprobe
