#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "senseprobe/common.hpp"
#include "senseprobe/inventory.hpp"
#include "senseprobe/lexicon.hpp"

namespace senseprobe {

enum class Split { Train, Test };

struct ProbeExample {
  std::string word;
  std::vector<ClassId> labels;  // sorted by id, at least one
  Split split = Split::Train;

  bool multiclass() const { return labels.size() >= 2; }
};

// Balanced word/S-class dataset: all multiclass words plus an equal-sized
// random sample of single-class words, each group split half/half into
// train and test.
struct ProbeDataset {
  std::vector<ProbeExample> examples;  // sorted by word
  std::uint64_t seed = 0;

  std::vector<const ProbeExample*> split_examples(Split s) const {
    std::vector<const ProbeExample*> out;
    for (const auto& e : examples) {
      if (e.split == s) out.push_back(&e);
    }
    return out;
  }

  std::size_t split_size(Split s) const { return split_examples(s).size(); }

  // word<TAB>class,class<TAB>train|test with a seed header line.
  void save_tsv(const std::string& path, const ClassInventory& inv) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out << "# seed=" << seed << "\n";
    for (const auto& e : examples) {
      std::vector<std::string> names;
      for (ClassId c : e.labels) names.push_back(inv.name(c));
      out << e.word << "\t" << join(names.begin(), names.end(), ",") << "\t"
          << (e.split == Split::Train ? "train" : "test") << "\n";
    }
  }

  static ProbeDataset load_tsv(const std::string& path,
                               const ClassInventory& inv) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    ProbeDataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        auto pos = line.find("seed=");
        if (pos != std::string::npos) ds.seed = std::stoull(line.substr(pos + 5));
        continue;
      }
      auto cols = split(line, '\t');
      if (cols.size() != 3) {
        throw ParseError("expected word<TAB>classes<TAB>split", line_no);
      }
      ProbeExample e;
      e.word = cols[0];
      for (const auto& name : split(cols[1], ',')) {
        e.labels.push_back(inv.require(name));
      }
      std::sort(e.labels.begin(), e.labels.end());
      if (e.labels.empty()) throw ParseError("example without labels", line_no);
      if (cols[2] == "train") {
        e.split = Split::Train;
      } else if (cols[2] == "test") {
        e.split = Split::Test;
      } else {
        throw ParseError("bad split tag '" + cols[2] + "'", line_no);
      }
      ds.examples.push_back(std::move(e));
    }
    return ds;
  }
};

// Builds the balanced dataset from a lexicon. Deterministic for a given
// seed. When single-class words are scarcer than multiclass words all of
// them are used and a warning is recorded; odd group sizes drop one word
// to keep |train| = |test| exact.
inline ProbeDataset build_probe_dataset(const SenseLexicon& lexicon,
                                        std::uint64_t seed,
                                        std::vector<std::string>* warnings = nullptr) {
  if (lexicon.empty()) throw std::invalid_argument("empty lexicon");

  std::vector<std::string> multi;
  std::vector<std::string> single;
  for (const auto& [word, counts] : lexicon) {
    (counts.size() >= 2 ? multi : single).push_back(word);
  }

  Rng rng(seed);
  shuffle(multi, rng);
  shuffle(single, rng);

  if (single.size() < multi.size()) {
    if (warnings) {
      warnings->push_back("only " + std::to_string(single.size()) +
                          " single-class words for " + std::to_string(multi.size()) +
                          " multiclass words; using all of them");
    }
  } else {
    single.resize(multi.size());
  }
  if (multi.size() % 2 == 1) multi.pop_back();
  if (single.size() % 2 == 1) single.pop_back();

  ProbeDataset ds;
  ds.seed = seed;
  auto emit = [&](const std::vector<std::string>& words) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      ProbeExample e;
      e.word = words[i];
      for (const auto& [cls, n] : lexicon.classes(words[i])) e.labels.push_back(cls);
      e.split = i < words.size() / 2 ? Split::Train : Split::Test;
      ds.examples.push_back(std::move(e));
    }
  };
  emit(multi);
  emit(single);
  std::sort(ds.examples.begin(), ds.examples.end(),
            [](const ProbeExample& a, const ProbeExample& b) { return a.word < b.word; });
  return ds;
}

}  // namespace senseprobe
