#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "senseprobe/dataset.hpp"
#include "senseprobe/embedding.hpp"
#include "senseprobe/lexicon.hpp"
#include "senseprobe/probes.hpp"

namespace senseprobe {

enum class Factor { Dominance, NumClasses, Frequency, Typicality };

inline const char* to_string(Factor f) {
  switch (f) {
    case Factor::Dominance: return "dominance";
    case Factor::NumClasses: return "classes";
    case Factor::Frequency: return "frequency";
    default: return "typicality";
  }
}

inline Factor parse_factor(const std::string& name) {
  if (name == "dominance") return Factor::Dominance;
  if (name == "classes") return Factor::NumClasses;
  if (name == "frequency") return Factor::Frequency;
  if (name == "typicality") return Factor::Typicality;
  throw std::invalid_argument("unknown factor: " + name);
}

// Centered bins: a value lands in the nearest center at most half_width
// away; equidistant values go to the higher center (count 15 with
// frequency levels every 10 belongs to the level-20 bin). Values farther
// than half_width from every center go to an explicit overflow bin.
struct FactorBinning {
  Factor factor = Factor::Dominance;
  std::vector<double> centers;
  double half_width = 0.05;

  std::optional<std::size_t> bin_of(double value) const {
    std::optional<std::size_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i) {
      double dist = std::abs(value - centers[i]);
      if (dist <= best_dist) {
        best_dist = dist;
        best = i;
      }
    }
    if (!best || best_dist > half_width * (1.0 + 1e-9)) return std::nullopt;
    return best;
  }

  static FactorBinning dominance_default() {
    FactorBinning b;
    b.factor = Factor::Dominance;
    b.half_width = 0.05;
    for (int i = 1; i <= 10; ++i) b.centers.push_back(i / 10.0);
    return b;
  }

  // Integer bins 1..max_classes.
  static FactorBinning num_classes_default(int max_classes) {
    FactorBinning b;
    b.factor = Factor::NumClasses;
    b.half_width = 0.5;
    for (int i = 1; i <= max_classes; ++i) b.centers.push_back(i);
    return b;
  }

  // Levels at multiples of 10; each covers [x-5, x+5).
  static FactorBinning frequency_default(std::uint64_t max_count) {
    FactorBinning b;
    b.factor = Factor::Frequency;
    b.half_width = 5.0;
    for (std::uint64_t c = 0; c <= max_count + 5; c += 10) {
      b.centers.push_back(static_cast<double>(c));
    }
    return b;
  }

  static FactorBinning typicality_default() {
    FactorBinning b;
    b.factor = Factor::Typicality;
    b.half_width = 0.05;
    for (int i = -10; i <= 10; ++i) b.centers.push_back(i / 10.0);
    return b;
  }
};

struct RecallBin {
  std::string label;
  double center = 0.0;
  std::uint64_t support = 0;
  std::uint64_t hits = 0;

  double recall() const {
    return support == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(support);
  }
};

// Per-bin recall of gold (word, class) pairs; bin supports partition the
// evaluated pairs (overflow and n/a included).
struct RecallCurve {
  Factor factor = Factor::Dominance;
  std::vector<RecallBin> bins;
  RecallBin overflow;
  RecallBin na;

  std::uint64_t total_support() const {
    std::uint64_t t = overflow.support + na.support;
    for (const auto& b : bins) t += b.support;
    return t;
  }

  std::uint64_t total_hits() const {
    std::uint64_t t = overflow.hits + na.hits;
    for (const auto& b : bins) t += b.hits;
    return t;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve: " + path);
    out << "factor,bin_center,recall,support\n";
    char buf[64];
    for (const auto& b : bins) {
      if (b.support == 0) continue;
      std::snprintf(buf, sizeof(buf), "%g,%.6f,%llu", b.center, b.recall(),
                    static_cast<unsigned long long>(b.support));
      out << to_string(factor) << "," << buf << "\n";
    }
    if (overflow.support > 0) {
      std::snprintf(buf, sizeof(buf), "overflow,%.6f,%llu", overflow.recall(),
                    static_cast<unsigned long long>(overflow.support));
      out << to_string(factor) << "," << buf << "\n";
    }
    if (na.support > 0) {
      std::snprintf(buf, sizeof(buf), "na,%.6f,%llu", na.recall(),
                    static_cast<unsigned long long>(na.support));
      out << to_string(factor) << "," << buf << "\n";
    }
  }
};

inline double dominance_of_pair(const SenseLexicon& lexicon, const std::string& word,
                                ClassId cls) {
  return lexicon.dominance(word, cls);
}

inline std::uint64_t frequency_of_pair(const SenseLexicon& lexicon,
                                       const std::string& word, ClassId cls) {
  return lexicon.count(word, cls);
}

// Pearson correlations between class indicator columns over the train
// split. Classes without variance get compatibility 0 by convention.
class CompatibilityMatrix {
 public:
  CompatibilityMatrix() = default;

  CompatibilityMatrix(const ProbeDataset& dataset, const ClassInventory& inv) {
    auto train = dataset.split_examples(Split::Train);
    const int c = inv.size();
    // Pearson over 0/1 indicators reduces to integer marginal and
    // co-occurrence counts, which also makes the matrix exactly
    // independent of word order.
    std::vector<std::int64_t> marginal(static_cast<std::size_t>(c), 0);
    std::vector<std::vector<std::int64_t>> joint(
        static_cast<std::size_t>(c), std::vector<std::int64_t>(static_cast<std::size_t>(c), 0));
    for (const auto* e : train) {
      for (ClassId a : e->labels) {
        marginal[static_cast<std::size_t>(a)] += 1;
        for (ClassId b : e->labels) {
          if (b > a) joint[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += 1;
        }
      }
    }
    const auto n = static_cast<std::int64_t>(train.size());
    compat_ = Eigen::MatrixXd::Zero(c, c);
    auto variance_num = [&](int a) {
      std::int64_t ca = marginal[static_cast<std::size_t>(a)];
      return n * ca - ca * ca;  // n^2 * variance of the indicator
    };
    for (int a = 0; a < c; ++a) {
      if (variance_num(a) <= 0) continue;  // constant column: convention 0
      compat_(a, a) = 1.0;
      for (int b = a + 1; b < c; ++b) {
        if (variance_num(b) <= 0) continue;
        std::int64_t cab = joint[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        std::int64_t ca = marginal[static_cast<std::size_t>(a)];
        std::int64_t cb = marginal[static_cast<std::size_t>(b)];
        double num = static_cast<double>(n * cab - ca * cb);
        double den = std::sqrt(static_cast<double>(variance_num(a))) *
                     std::sqrt(static_cast<double>(variance_num(b)));
        double r = num / den;
        compat_(a, b) = r;
        compat_(b, a) = r;
      }
    }
  }

  double at(ClassId a, ClassId b) const { return compat_(a, b); }
  Eigen::Index size() const { return compat_.rows(); }
  const Eigen::MatrixXd& matrix() const { return compat_; }

  void write_csv(const std::string& path, const ClassInventory& inv) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write compatibility matrix: " + path);
    out << "class";
    for (int c = 0; c < inv.size(); ++c) out << "," << inv.name(c);
    out << "\n";
    char buf[32];
    for (int a = 0; a < inv.size(); ++a) {
      out << inv.name(a);
      for (int b = 0; b < inv.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%.6f", compat_(a, b));
        out << "," << buf;
      }
      out << "\n";
    }
  }

 private:
  Eigen::MatrixXd compat_;
};

// Mean compatibility of cls with the word's other classes; undefined
// (nullopt) for single-class words.
inline std::optional<double> typicality(const CompatibilityMatrix& compat,
                                        const SenseLexicon& lexicon,
                                        const std::string& word, ClassId cls) {
  const auto& counts = lexicon.classes(word);
  if (counts.count(cls) == 0) {
    throw std::invalid_argument("pair not in lexicon: " + word);
  }
  if (counts.size() < 2) return std::nullopt;
  double sum = 0.0;
  int n = 0;
  for (const auto& [other, cnt] : counts) {
    if (other == cls) continue;
    sum += compat.at(cls, other);
    ++n;
  }
  return sum / n;
}

// Slices test-split recall by one of the four factors. The factor value
// of a (word, class) pair comes from the gold lexicon; typicality also
// needs the train-split compatibility matrix.
inline RecallCurve recall_by_factor(const SClassPredictions& pred,
                                    const ProbeDataset& dataset,
                                    const SenseLexicon& lexicon, Factor factor,
                                    const FactorBinning& binning,
                                    const CompatibilityMatrix* compat = nullptr) {
  if (factor == Factor::Typicality && compat == nullptr) {
    throw std::invalid_argument("typicality requires a compatibility matrix");
  }
  auto test = dataset.split_examples(Split::Test);
  std::map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < pred.words.size(); ++i) pred_index[pred.words[i]] = i;

  RecallCurve curve;
  curve.factor = factor;
  curve.bins.resize(binning.centers.size());
  for (std::size_t i = 0; i < binning.centers.size(); ++i) {
    curve.bins[i].center = binning.centers[i];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", binning.centers[i]);
    curve.bins[i].label = buf;
  }
  curve.overflow.label = "overflow";
  curve.na.label = "na";

  for (const auto* e : test) {
    auto it = pred_index.find(e->word);
    if (it == pred_index.end()) continue;  // word had no embedding
    const auto& plabels = pred.labels[it->second];
    for (ClassId cls : e->labels) {
      bool hit = std::find(plabels.begin(), plabels.end(), cls) != plabels.end();
      RecallBin* bin = nullptr;
      std::optional<double> value;
      switch (factor) {
        case Factor::Dominance:
          value = lexicon.dominance(e->word, cls);
          break;
        case Factor::NumClasses:
          value = static_cast<double>(e->labels.size());
          break;
        case Factor::Frequency:
          value = static_cast<double>(lexicon.count(e->word, cls));
          break;
        case Factor::Typicality:
          value = typicality(*compat, lexicon, e->word, cls);
          break;
      }
      if (!value) {
        bin = &curve.na;
      } else if (auto bi = binning.bin_of(*value)) {
        bin = &curve.bins[*bi];
      } else {
        bin = &curve.overflow;
      }
      bin->support += 1;
      if (hit) bin->hits += 1;
    }
  }
  return curve;
}

struct NeighborDiversityEntry {
  std::string word;
  int unique_classes = 0;
  int neighbors_skipped = 0;  // neighbors without a lexicon entry
};

struct NeighborDiversityResult {
  std::vector<NeighborDiversityEntry> per_word;
  double mean_unique_classes = 0.0;
};

// For each word: the number of distinct S-classes in the union of the
// class sets of its k nearest neighbors (cosine, self excluded).
// Neighbor classes come from the gold lexicon; neighbors missing from it
// are skipped and counted.
inline NeighborDiversityResult neighbor_diversity(const EmbeddingTable& table,
                                                  const std::vector<std::string>& words,
                                                  const SenseLexicon& lexicon,
                                                  int k = 5) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k >= table.vocab().size()) {
    throw std::invalid_argument("k must be smaller than the vocabulary");
  }
  NeighborDiversityResult result;
  double sum = 0.0;
  for (const auto& word : words) {
    auto id = table.vocab().id_of(word);
    if (!id) throw std::invalid_argument("word not in embedding table: " + word);
    auto q = table.row(*id);

    // Exhaustive top-k scan, self excluded; ties break toward the lower
    // row index.
    std::vector<std::pair<double, std::int32_t>> best;
    for (std::int32_t i = 0; i < table.vocab().size(); ++i) {
      if (i == *id) continue;
      best.emplace_back(cosine(q, table.row(i)), i);
    }
    std::partial_sort(best.begin(), best.begin() + k, best.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });

    NeighborDiversityEntry entry;
    entry.word = word;
    std::vector<ClassId> classes;
    for (int i = 0; i < k; ++i) {
      const std::string& nb = table.vocab().words[static_cast<std::size_t>(best[static_cast<std::size_t>(i)].second)];
      if (!lexicon.has(nb)) {
        ++entry.neighbors_skipped;
        continue;
      }
      for (const auto& [cls, n] : lexicon.classes(nb)) classes.push_back(cls);
    }
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    entry.unique_classes = static_cast<int>(classes.size());
    sum += entry.unique_classes;
    result.per_word.push_back(std::move(entry));
  }
  if (!result.per_word.empty()) {
    result.mean_unique_classes = sum / static_cast<double>(result.per_word.size());
  }
  return result;
}

// Mean neighbor diversity of two-class words grouped by the dominance of
// their minority class (0.5 means perfectly balanced senses).
inline std::map<double, std::pair<double, std::uint64_t>> neighbor_diversity_by_dominance(
    const EmbeddingTable& table, const SenseLexicon& lexicon, int k,
    const FactorBinning& binning) {
  std::map<double, std::pair<double, std::uint64_t>> acc;  // center -> (sum, n)
  for (const auto& [word, counts] : lexicon) {
    if (counts.size() != 2) continue;
    if (!table.vocab().id_of(word)) continue;
    double minority = 1.0;
    for (const auto& [cls, n] : counts) {
      minority = std::min(minority, lexicon.dominance(word, cls));
    }
    auto bin = binning.bin_of(minority);
    if (!bin) continue;
    auto r = neighbor_diversity(table, {word}, lexicon, k);
    auto& cell = acc[binning.centers[*bin]];
    cell.first += r.per_word.front().unique_classes;
    cell.second += 1;
  }
  for (auto& [center, cell] : acc) {
    if (cell.second > 0) cell.first /= static_cast<double>(cell.second);
  }
  return acc;
}

// Spearman rank correlation; average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman needs two equal-length series, n >= 2");
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0 || dy == 0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace senseprobe
