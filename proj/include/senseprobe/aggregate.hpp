#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "senseprobe/embedding.hpp"
#include "senseprobe/inventory.hpp"
#include "senseprobe/lexicon.hpp"

namespace senseprobe {

enum class AggregateMode { Unif, Wght };

inline const char* to_string(AggregateMode m) {
  return m == AggregateMode::Unif ? "unif" : "wght";
}

// Sense token for a (word, class) pair; word is already "@"-wrapped.
inline std::string sense_token(const std::string& word, const std::string& class_name) {
  return word + "-" + class_name;
}

struct CoverageIssue {
  std::string word;
  std::vector<ClassId> missing;
};

// Words whose sense vectors were only partially present, and words that
// had to be dropped entirely.
struct CoverageReport {
  std::vector<CoverageIssue> partial;
  std::vector<std::string> dropped;
  std::size_t words_requested = 0;
  std::size_t words_covered = 0;

  void write_csv(const std::string& path, const ClassInventory& inv) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write coverage report: " + path);
    out << "word,missing_classes\n";
    for (const auto& issue : partial) {
      std::vector<std::string> names;
      for (ClassId c : issue.missing) names.push_back(inv.name(c));
      out << issue.word << "," << join(names.begin(), names.end(), ";") << "\n";
    }
    for (const auto& w : dropped) out << w << ",ALL\n";
  }
};

// Aggregate embedding of one word from its sense vectors. Unif sums the
// present sense vectors with weight 1; Wght weights each by its lexicon
// count, renormalized over the senses whose vectors exist. Throws when
// the word is unknown or no sense vector is present; partially covered
// words aggregate over the present senses and are reported via `missing`.
inline std::vector<float> aggregate(AggregateMode mode, const SenseLexicon& lexicon,
                                    const ClassInventory& inv,
                                    const EmbeddingTable& sense_table,
                                    const std::string& word,
                                    std::vector<ClassId>* missing = nullptr) {
  const auto& counts = lexicon.classes(word);  // throws if absent

  std::vector<std::pair<std::span<const float>, double>> present;
  double weight_total = 0.0;
  for (const auto& [cls, n] : counts) {
    auto vec = sense_table.vector_of(sense_token(word, inv.name(cls)));
    if (!vec) {
      if (missing != nullptr) missing->push_back(cls);
      continue;
    }
    double w = mode == AggregateMode::Unif ? 1.0 : static_cast<double>(n);
    present.emplace_back(*vec, w);
    weight_total += w;
  }
  if (present.empty()) {
    throw std::runtime_error("no sense vectors present for word: " + word);
  }

  std::size_t dim = present.front().first.size();
  std::vector<double> acc(dim, 0.0);
  for (const auto& [vec, w] : present) {
    double alpha = mode == AggregateMode::Unif ? 1.0 : w / weight_total;
    for (std::size_t i = 0; i < dim; ++i) acc[i] += alpha * vec[i];
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

// Aggregated table over `words`, dim equal to the sense table's. Words
// with no present sense vector are dropped and listed in the report.
inline EmbeddingTable build_aggregate_table(AggregateMode mode,
                                            const SenseLexicon& lexicon,
                                            const ClassInventory& inv,
                                            const EmbeddingTable& sense_table,
                                            const std::vector<std::string>& words,
                                            CoverageReport* report = nullptr) {
  if (words.empty()) throw std::invalid_argument("empty word list");

  std::vector<std::string> kept;
  std::vector<std::vector<float>> vectors;
  CoverageReport local;
  local.words_requested = words.size();
  for (const auto& word : words) {
    std::vector<ClassId> missing;
    try {
      auto vec = aggregate(mode, lexicon, inv, sense_table, word, &missing);
      kept.push_back(word);
      vectors.push_back(std::move(vec));
      ++local.words_covered;
      if (!missing.empty()) local.partial.push_back({word, std::move(missing)});
    } catch (const std::exception&) {
      local.dropped.push_back(word);
    }
  }
  if (kept.empty()) throw std::runtime_error("no aggregatable words in list");

  Vocabulary vocab;
  vocab.words = kept;
  vocab.counts.assign(kept.size(), 0);
  vocab.rebuild_index();
  EmbeddingTable table(std::move(vocab), sense_table.dim(), EmbeddingMode::Imported);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto row = table.row(static_cast<std::int32_t>(i));
    std::copy(vectors[i].begin(), vectors[i].end(), row.begin());
  }
  if (report != nullptr) *report = std::move(local);
  return table;
}

}  // namespace senseprobe
