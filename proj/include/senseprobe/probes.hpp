#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "senseprobe/classifier.hpp"
#include "senseprobe/common.hpp"
#include "senseprobe/dataset.hpp"
#include "senseprobe/embedding.hpp"
#include "senseprobe/lexicon.hpp"

namespace senseprobe {

// Predicted S-class sets for the test split, in test-split word order.
struct SClassPredictions {
  std::vector<std::string> words;
  std::vector<std::vector<ClassId>> labels;
};

// Binary ambiguity decisions with the classifier's likelihood of the
// word being multi-sense.
struct AmbiguityPredictions {
  std::vector<std::string> words;
  std::vector<int> flags;
  std::vector<double> likelihoods;
};

struct BinMetric {
  std::string name;
  double value = 0.0;
  std::uint64_t support = 0;
};

struct EvalReport {
  std::string task;
  std::map<std::string, double> metrics;
  std::vector<std::pair<std::string, double>> per_class;
  std::vector<BinMetric> bins;
  std::vector<std::string> warnings;
  std::string fingerprint;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["fingerprint"] = fingerprint;
    j["metrics"] = metrics;
    auto& pc = j["per_class"] = nlohmann::ordered_json::array();
    for (const auto& [name, v] : per_class) pc.push_back({{"class", name}, {"f1", v}});
    auto& bs = j["bins"] = nlohmann::ordered_json::array();
    for (const auto& b : bins) {
      bs.push_back({{"bin", b.name}, {"value", b.value}, {"support", b.support}});
    }
    j["warnings"] = warnings;
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << to_json().dump(2) << "\n";
  }
};

namespace detail {

inline std::string probe_fingerprint(const EmbeddingTable& table,
                                     const ProbeDataset& dataset,
                                     const std::string& clf, std::uint64_t seed) {
  std::uint64_t h = table.content_hash();
  h = fnv1a64(std::to_string(dataset.seed), h);
  for (const auto& e : dataset.examples) {
    h = fnv1a64(e.word, h);
    for (ClassId c : e.labels) h = fnv1a64(std::to_string(c), h);
    h = fnv1a64(e.split == Split::Train ? "t" : "e", h);
  }
  h = fnv1a64(clf, h);
  h = fnv1a64(std::to_string(seed), h);
  return to_hex(h);
}

inline Eigen::VectorXd to_eigen(std::span<const float> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = static_cast<double>(v[i]);
  }
  return out;
}

// Gathers the split's examples that have an embedding; missing words are
// counted and reported by the caller.
struct SplitMatrix {
  Eigen::MatrixXd X;
  std::vector<const ProbeExample*> examples;
  std::size_t missing = 0;
};

inline SplitMatrix gather(const EmbeddingTable& table, const ProbeDataset& dataset,
                          Split split, bool normalize,
                          std::vector<std::string>* warnings) {
  SplitMatrix out;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& e : dataset.examples) {
    if (e.split != split) continue;
    auto vec = table.vector_of(e.word);
    if (!vec) {
      ++out.missing;
      continue;
    }
    Eigen::VectorXd x = to_eigen(*vec);
    if (normalize) {
      double n = x.norm();
      if (n == 0.0) {
        ++out.missing;
        if (warnings) {
          warnings->push_back("zero vector excluded under normalization: " + e.word);
        }
        continue;
      }
      x /= n;
    }
    rows.push_back(std::move(x));
    out.examples.push_back(&e);
  }
  if (!rows.empty()) {
    out.X.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.X.row(static_cast<Eigen::Index>(i)) = rows[i];
    }
  }
  return out;
}

}  // namespace detail

// Pooled micro-F1 over all (example, class) decisions. pred must cover
// exactly the gold test split, in order.
inline double micro_f1(const SClassPredictions& pred, const ProbeDataset& gold) {
  auto test = gold.split_examples(Split::Test);
  if (pred.words.size() != test.size()) {
    throw std::invalid_argument("prediction/gold example count mismatch: " +
                                std::to_string(pred.words.size()) + " vs " +
                                std::to_string(test.size()));
  }
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (pred.words[i] != test[i]->word) {
      throw std::invalid_argument("prediction/gold example mismatch at " +
                                  std::to_string(i) + ": " + pred.words[i] +
                                  " vs " + test[i]->word);
    }
    const auto& p = pred.labels[i];
    const auto& g = test[i]->labels;
    for (ClassId c : p) {
      if (std::find(g.begin(), g.end(), c) != g.end()) {
        ++tp;
      } else {
        ++fp;
      }
    }
    for (ClassId c : g) {
      if (std::find(p.begin(), p.end(), c) == p.end()) ++fn;
    }
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// One binary classifier per S-class, trained on the train split
// (positives = words carrying the class) and applied to the test split.
inline std::pair<SClassPredictions, EvalReport> run_sclass_probe(
    const EmbeddingTable& table, const ProbeDataset& dataset,
    const ClassInventory& inv, const ClassifierKind& kind, std::uint64_t seed = 1,
    bool normalize = false, int jobs = 1) {
  EvalReport report;
  report.task = "sclass";
  report.fingerprint = detail::probe_fingerprint(table, dataset, kind.name(), seed);

  auto train = detail::gather(table, dataset, Split::Train, normalize, &report.warnings);
  auto test = detail::gather(table, dataset, Split::Test, normalize, &report.warnings);
  if (train.examples.empty() || test.examples.empty()) {
    throw std::runtime_error("no embedded examples in train or test split");
  }
  report.metrics["missing_train_words"] = static_cast<double>(train.missing);
  report.metrics["missing_test_words"] = static_cast<double>(test.missing);

  const int n_classes = inv.size();
  std::vector<std::vector<int>> decisions(
      static_cast<std::size_t>(n_classes),
      std::vector<int>(test.examples.size(), 0));
  std::vector<std::string> fit_warnings(static_cast<std::size_t>(n_classes));

  Rng base(seed);
  std::vector<std::uint64_t> class_seeds;
  class_seeds.reserve(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) class_seeds.push_back(base.next_u64());

  parallel_for(static_cast<std::size_t>(n_classes), jobs, [&](std::size_t ci) {
    ClassId c = static_cast<ClassId>(ci);
    std::vector<int> y;
    y.reserve(train.examples.size());
    for (const auto* e : train.examples) {
      bool pos = std::find(e->labels.begin(), e->labels.end(), c) != e->labels.end();
      y.push_back(pos ? 1 : 0);
    }
    std::vector<std::string> w;
    auto model = fit_binary(kind, train.X, y, class_seeds[ci], &w);
    if (!w.empty()) fit_warnings[ci] = inv.name(c) + ": " + w.front();
    for (std::size_t i = 0; i < test.examples.size(); ++i) {
      if (model->predict(test.X.row(static_cast<Eigen::Index>(i)))) {
        decisions[ci][i] = 1;
      }
    }
  });
  for (auto& w : fit_warnings) {
    if (!w.empty()) report.warnings.push_back(std::move(w));
  }

  SClassPredictions pred;
  pred.words.reserve(test.examples.size());
  pred.labels.resize(test.examples.size());
  for (std::size_t i = 0; i < test.examples.size(); ++i) {
    pred.words.push_back(test.examples[i]->word);
    for (int c = 0; c < n_classes; ++c) {
      if (decisions[static_cast<std::size_t>(c)][i] != 0) {
        pred.labels[i].push_back(c);
      }
    }
  }

  // Gold restricted to the embedded test examples for scoring.
  ProbeDataset covered;
  covered.seed = dataset.seed;
  for (const auto* e : train.examples) covered.examples.push_back(*e);
  for (const auto* e : test.examples) covered.examples.push_back(*e);
  report.metrics["micro_f1"] = micro_f1(pred, covered);

  // Per-class F1 on pooled counts of that class alone.
  for (int c = 0; c < n_classes; ++c) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < test.examples.size(); ++i) {
      bool p = decisions[static_cast<std::size_t>(c)][i] != 0;
      const auto& g = test.examples[i]->labels;
      bool gold = std::find(g.begin(), g.end(), c) != g.end();
      if (p && gold) ++tp;
      if (p && !gold) ++fp;
      if (!p && gold) ++fn;
    }
    double f1 = (2 * tp + fp + fn) == 0
                    ? 0.0
                    : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    if (tp + fn > 0) report.per_class.emplace_back(inv.name(c), f1);
  }
  return {std::move(pred), std::move(report)};
}

// Baseline that assigns each class independently with its train-split
// prior probability.
inline std::pair<SClassPredictions, EvalReport> random_baseline(
    const ProbeDataset& dataset, const ClassInventory& inv, std::uint64_t seed) {
  auto train = dataset.split_examples(Split::Train);
  auto test = dataset.split_examples(Split::Test);
  if (train.empty()) throw std::invalid_argument("empty train split");

  std::vector<double> prior(static_cast<std::size_t>(inv.size()), 0.0);
  for (const auto* e : train) {
    for (ClassId c : e->labels) prior[static_cast<std::size_t>(c)] += 1.0;
  }
  for (auto& p : prior) p /= static_cast<double>(train.size());

  Rng rng(seed);
  SClassPredictions pred;
  EvalReport report;
  report.task = "sclass_random_baseline";
  for (const auto* e : test) {
    pred.words.push_back(e->word);
    std::vector<ClassId> labels;
    for (int c = 0; c < inv.size(); ++c) {
      if (rng.bernoulli(prior[static_cast<std::size_t>(c)])) labels.push_back(c);
    }
    pred.labels.push_back(std::move(labels));
  }
  report.metrics["micro_f1"] = micro_f1(pred, dataset);
  report.fingerprint = to_hex(fnv1a64("random:" + std::to_string(seed)));
  return {std::move(pred), std::move(report)};
}

// Binary probe: does the embedding alone reveal whether the word has one
// S-class or several? Vectors are L2-normalized by default.
inline std::pair<AmbiguityPredictions, EvalReport> run_ambiguity_probe(
    const EmbeddingTable& table, const ProbeDataset& dataset,
    const ClassifierKind& kind, bool normalize = true, std::uint64_t seed = 1) {
  EvalReport report;
  report.task = "ambiguity";
  report.fingerprint = detail::probe_fingerprint(
      table, dataset, std::string(kind.name()) + (normalize ? "+norm" : ""), seed);

  auto train = detail::gather(table, dataset, Split::Train, normalize, &report.warnings);
  auto test = detail::gather(table, dataset, Split::Test, normalize, &report.warnings);
  if (train.examples.empty() || test.examples.empty()) {
    throw std::runtime_error("no embedded examples in train or test split");
  }
  report.metrics["missing_train_words"] = static_cast<double>(train.missing);
  report.metrics["missing_test_words"] = static_cast<double>(test.missing);

  std::vector<int> y;
  y.reserve(train.examples.size());
  for (const auto* e : train.examples) y.push_back(e->multiclass() ? 1 : 0);
  auto model = fit_binary(kind, train.X, y, seed, &report.warnings);

  AmbiguityPredictions pred;
  std::uint64_t correct = 0;
  std::map<std::size_t, std::pair<std::uint64_t, std::uint64_t>> by_count;  // classes -> (correct, total)
  for (std::size_t i = 0; i < test.examples.size(); ++i) {
    const auto* e = test.examples[i];
    double p = model->predict_proba(test.X.row(static_cast<Eigen::Index>(i)));
    int flag = p >= 0.5 ? 1 : 0;
    int gold = e->multiclass() ? 1 : 0;
    pred.words.push_back(e->word);
    pred.flags.push_back(flag);
    pred.likelihoods.push_back(p);
    if (flag == gold) ++correct;
    auto& cell = by_count[e->labels.size()];
    if (flag == gold) ++cell.first;
    ++cell.second;
  }
  report.metrics["accuracy"] =
      static_cast<double>(correct) / static_cast<double>(test.examples.size());
  for (const auto& [k, cell] : by_count) {
    BinMetric b;
    b.name = "classes=" + std::to_string(k);
    b.value = static_cast<double>(cell.first) / static_cast<double>(cell.second);
    b.support = cell.second;
    report.bins.push_back(std::move(b));
  }
  return {std::move(pred), std::move(report)};
}

// LR on the single feature log(corpus frequency of the word).
inline EvalReport frequency_baseline(const ProbeDataset& dataset,
                                     const SenseLexicon& lexicon) {
  EvalReport report;
  report.task = "ambiguity_frequency_baseline";

  auto featurize = [&](const ProbeExample& e) {
    return std::log(static_cast<double>(lexicon.total(e.word)) + 1.0);
  };
  auto train = dataset.split_examples(Split::Train);
  auto test = dataset.split_examples(Split::Test);
  if (train.empty() || test.empty()) throw std::invalid_argument("empty split");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), 1);
  std::vector<int> y;
  for (std::size_t i = 0; i < train.size(); ++i) {
    X(static_cast<Eigen::Index>(i), 0) = featurize(*train[i]);
    y.push_back(train[i]->multiclass() ? 1 : 0);
  }
  ClassifierKind kind;
  kind.type = ClassifierType::Lr;
  auto model = fit_binary(kind, X, y, 1, &report.warnings);

  std::uint64_t correct = 0;
  for (const auto* e : test) {
    Eigen::VectorXd x(1);
    x(0) = featurize(*e);
    int flag = model->predict(x) ? 1 : 0;
    if (flag == (e->multiclass() ? 1 : 0)) ++correct;
  }
  report.metrics["accuracy"] =
      static_cast<double>(correct) / static_cast<double>(test.size());
  report.fingerprint = to_hex(fnv1a64("frequency_baseline"));
  return report;
}

// Table-7 style CSV: word, frequency, classes, likelihood; sorted by
// descending likelihood then word.
inline void write_likelihood_csv(const AmbiguityPredictions& pred,
                                 const ProbeDataset& dataset,
                                 const SenseLexicon& lexicon,
                                 const ClassInventory& inv,
                                 const std::string& path) {
  std::map<std::string, const ProbeExample*> by_word;
  for (const auto& e : dataset.examples) by_word[e.word] = &e;

  std::vector<std::size_t> order(pred.words.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pred.likelihoods[a] != pred.likelihoods[b]) {
      return pred.likelihoods[a] > pred.likelihoods[b];
    }
    return pred.words[a] < pred.words[b];
  });

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write likelihood csv: " + path);
  out << "word,frequency,classes,likelihood\n";
  char buf[32];
  for (std::size_t i : order) {
    const auto& word = pred.words[i];
    std::uint64_t freq = lexicon.has(word) ? lexicon.total(word) : 0;
    std::string classes;
    if (auto it = by_word.find(word); it != by_word.end()) {
      std::vector<std::string> names;
      for (ClassId c : it->second->labels) names.push_back(inv.name(c));
      classes = join(names.begin(), names.end(), ";");
    }
    std::snprintf(buf, sizeof(buf), "%.4f", pred.likelihoods[i]);
    out << word << "," << freq << "," << classes << "," << buf << "\n";
  }
}

inline void write_per_class_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write per-class csv: " + path);
  out << "class,f1\n";
  char buf[32];
  for (const auto& [name, f1] : report.per_class) {
    std::snprintf(buf, sizeof(buf), "%.6f", f1);
    out << name << "," << buf << "\n";
  }
}

// Prediction sets are exchanged between `probe` and `analyze` as TSV:
// word<TAB>comma-separated class names (possibly empty).
inline void save_predictions_tsv(const SClassPredictions& pred,
                                 const ClassInventory& inv,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path);
  for (std::size_t i = 0; i < pred.words.size(); ++i) {
    std::vector<std::string> names;
    for (ClassId c : pred.labels[i]) names.push_back(inv.name(c));
    out << pred.words[i] << "\t" << join(names.begin(), names.end(), ",") << "\n";
  }
}

inline SClassPredictions load_predictions_tsv(const std::string& path,
                                              const ClassInventory& inv) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path);
  SClassPredictions pred;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError("expected word<TAB>classes", line_no);
    pred.words.push_back(cols[0]);
    std::vector<ClassId> labels;
    if (!cols[1].empty()) {
      for (const auto& name : split(cols[1], ',')) labels.push_back(inv.require(name));
    }
    std::sort(labels.begin(), labels.end());
    pred.labels.push_back(std::move(labels));
  }
  return pred;
}

}  // namespace senseprobe
