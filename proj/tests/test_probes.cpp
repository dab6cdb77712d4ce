#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "oracles.hpp"
#include "senseprobe/probes.hpp"

using namespace senseprobe;

namespace {

ClassInventory inventory_of(int k) {
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("c" + std::to_string(i));
  return ClassInventory(names);
}

ProbeDataset dataset_of(const std::vector<std::tuple<std::string, std::vector<ClassId>, Split>>& rows) {
  ProbeDataset ds;
  for (const auto& [word, labels, split] : rows) {
    ProbeExample e;
    e.word = word;
    e.labels = labels;
    std::sort(e.labels.begin(), e.labels.end());
    e.split = split;
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

EmbeddingTable table_of(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  Vocabulary vocab;
  for (const auto& [w, v] : rows) vocab.words.push_back(w);
  vocab.counts.assign(vocab.words.size(), 0);
  vocab.rebuild_index();
  EmbeddingTable table(vocab, static_cast<int>(rows.front().second.size()),
                       EmbeddingMode::Imported);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = table.row(static_cast<std::int32_t>(i));
    std::copy(rows[i].second.begin(), rows[i].second.end(), r.begin());
  }
  return table;
}

// Multi-hot indicator embeddings: labels are linearly recoverable by
// construction, an upper-bound sanity table.
struct PerfectSetup {
  ClassInventory inv;
  ProbeDataset dataset;
  EmbeddingTable table;
};

PerfectSetup perfect_setup(int n_classes, int words_per_class, std::uint64_t seed) {
  PerfectSetup s{inventory_of(n_classes), {}, {}};
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  Rng rng(seed);
  int idx = 0;
  auto add_word = [&](std::vector<ClassId> labels) {
    std::string word = "w" + std::to_string(idx++);
    std::vector<float> vec(static_cast<std::size_t>(n_classes), 0.0f);
    for (ClassId c : labels) vec[static_cast<std::size_t>(c)] = 1.0f;
    rows.push_back({word, vec});
    ProbeExample e;
    e.word = word;
    e.labels = labels;
    std::sort(e.labels.begin(), e.labels.end());
    e.split = rng.bernoulli(0.5) ? Split::Train : Split::Test;
    s.dataset.examples.push_back(std::move(e));
  };
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < words_per_class; ++i) add_word({c});
  }
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < words_per_class / 2; ++i) {
      add_word({c, (c + 1) % n_classes});
    }
  }
  s.table = table_of(rows);
  return s;
}

}  // namespace

TEST_CASE("micro f1 by definition: TP=2 FP=1 FN=1 gives 2/3") {
  auto ds = dataset_of({
      {"a", {0, 1}, Split::Test},  // predict {0, 2}: TP=1 FP=1 FN=1
      {"b", {2}, Split::Test},     // predict {2}: TP=1
  });
  SClassPredictions pred;
  pred.words = {"a", "b"};
  pred.labels = {{0, 2}, {2}};
  CHECK(micro_f1(pred, ds) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("micro f1 identity and empty-prediction zero") {
  auto ds = dataset_of({{"a", {0, 1}, Split::Test}, {"b", {2}, Split::Test}});
  SClassPredictions exact;
  exact.words = {"a", "b"};
  exact.labels = {{0, 1}, {2}};
  CHECK(micro_f1(exact, ds) == 1.0);

  SClassPredictions empty;
  empty.words = {"a", "b"};
  empty.labels = {{}, {}};
  CHECK(micro_f1(empty, ds) == 0.0);
}

TEST_CASE("micro f1 rejects example mismatches") {
  auto ds = dataset_of({{"a", {0}, Split::Test}});
  SClassPredictions wrong_word;
  wrong_word.words = {"b"};
  wrong_word.labels = {{0}};
  CHECK_THROWS_AS(micro_f1(wrong_word, ds), std::invalid_argument);
  SClassPredictions wrong_count;
  wrong_count.words = {"a", "b"};
  wrong_count.labels = {{0}, {0}};
  CHECK_THROWS_AS(micro_f1(wrong_count, ds), std::invalid_argument);
}

TEST_CASE("micro f1 matches the counting oracle on random cases") {
  Rng rng(101);
  const int n_classes = 7;
  for (int trial = 0; trial < 120; ++trial) {
    int n = 1 + static_cast<int>(rng.bounded(30));
    std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
    SClassPredictions pred;
    std::vector<std::set<int>> oracle_pred, oracle_gold;
    for (int i = 0; i < n; ++i) {
      std::vector<ClassId> gold, p;
      std::set<int> gs, ps;
      for (int c = 0; c < n_classes; ++c) {
        if (rng.bernoulli(0.3)) {
          gold.push_back(c);
          gs.insert(c);
        }
        if (rng.bernoulli(0.3)) {
          p.push_back(c);
          ps.insert(c);
        }
      }
      if (gold.empty()) {
        gold.push_back(0);
        gs.insert(0);
      }
      std::string w = "w" + std::to_string(i);
      rows.push_back({w, gold, Split::Test});
      pred.words.push_back(w);
      pred.labels.push_back(p);
      oracle_pred.push_back(ps);
      oracle_gold.push_back(gs);
    }
    auto ds = dataset_of(rows);
    double expect = oracles::micro_f1(oracle_pred, oracle_gold, n_classes);
    CHECK(micro_f1(pred, ds) == expect);  // zero tolerance
  }
}

TEST_CASE("micro f1 is permutation invariant over examples") {
  Rng rng(102);
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  SClassPredictions pred;
  for (int i = 0; i < 20; ++i) {
    std::vector<ClassId> gold = {static_cast<ClassId>(rng.bounded(4))};
    std::vector<ClassId> p;
    if (rng.bernoulli(0.6)) p.push_back(static_cast<ClassId>(rng.bounded(4)));
    std::string w = "w" + std::to_string(i);
    rows.push_back({w, gold, Split::Test});
    pred.words.push_back(w);
    pred.labels.push_back(p);
  }
  auto ds = dataset_of(rows);
  double base = micro_f1(pred, ds);

  // Reverse both in lockstep.
  auto rev_rows = rows;
  std::reverse(rev_rows.begin(), rev_rows.end());
  SClassPredictions rev_pred;
  rev_pred.words.assign(pred.words.rbegin(), pred.words.rend());
  rev_pred.labels.assign(pred.labels.rbegin(), pred.labels.rend());
  CHECK(micro_f1(rev_pred, dataset_of(rev_rows)) == base);
}

TEST_CASE("perfect multi-hot embeddings reach micro f1 1.0") {
  auto s = perfect_setup(5, 8, 7);
  for (const char* clf : {"lr", "mlp"}) {
    ClassifierKind kind = ClassifierKind::parse(clf);
    kind.mlp.hidden = 16;
    auto [pred, report] = run_sclass_probe(s.table, s.dataset, s.inv, kind, 3);
    INFO(clf);
    CHECK(report.metrics.at("micro_f1") == 1.0);
  }
}

TEST_CASE("class without train positives yields a constant-negative model and warning") {
  auto inv = inventory_of(3);
  auto ds = dataset_of({
      {"a", {0}, Split::Train},
      {"b", {1}, Split::Train},
      {"c", {0}, Split::Test},
      {"d", {2}, Split::Test},  // class 2 never in train
  });
  auto table = table_of({{"a", {1, 0, 0}}, {"b", {0, 1, 0}}, {"c", {1, 0, 0}}, {"d", {0, 0, 1}}});
  auto [pred, report] = run_sclass_probe(table, ds, inv, ClassifierKind::parse("lr"), 1);
  bool warned = false;
  for (const auto& w : report.warnings) {
    if (w.find("single-class") != std::string::npos) warned = true;
  }
  CHECK(warned);
  // class 2 never predicted
  for (const auto& labels : pred.labels) {
    CHECK(std::find(labels.begin(), labels.end(), 2) == labels.end());
  }
}

TEST_CASE("missing embedding words are excluded and counted") {
  auto inv = inventory_of(2);
  auto ds = dataset_of({
      {"a", {0}, Split::Train},
      {"b", {1}, Split::Train},
      {"gone", {0}, Split::Train},
      {"c", {0}, Split::Test},
      {"also_gone", {1}, Split::Test},
  });
  auto table = table_of({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 0}}});
  auto [pred, report] = run_sclass_probe(table, ds, inv, ClassifierKind::parse("lr"), 1);
  CHECK(report.metrics.at("missing_train_words") == 1.0);
  CHECK(report.metrics.at("missing_test_words") == 1.0);
  CHECK(pred.words == std::vector<std::string>{"c"});
}

TEST_CASE("random baseline: zero priors give empty predictions and f1 0") {
  auto inv = inventory_of(3);
  // Train words carry only class 0; classes 1, 2 have prior 0.
  auto ds = dataset_of({
      {"a", {0}, Split::Train},
      {"b", {0}, Split::Train},
      {"c", {1}, Split::Test},
      {"d", {2}, Split::Test},
  });
  auto [pred, report] = random_baseline(ds, inv, 4);
  // Class 0 prior is 1 so it is always predicted; gold never has it.
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    CHECK(std::find(pred.labels[i].begin(), pred.labels[i].end(), 1) ==
          pred.labels[i].end());
    CHECK(std::find(pred.labels[i].begin(), pred.labels[i].end(), 2) ==
          pred.labels[i].end());
  }
  CHECK(report.metrics.at("micro_f1") == 0.0);
}

TEST_CASE("random baseline mean f1 matches an independent monte-carlo simulation") {
  auto inv = inventory_of(5);
  Rng setup(11);
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  for (int i = 0; i < 150; ++i) {
    std::vector<ClassId> labels;
    for (int c = 0; c < 5; ++c) {
      if (setup.bernoulli(0.25)) labels.push_back(c);
    }
    if (labels.empty()) labels.push_back(static_cast<ClassId>(setup.bounded(5)));
    rows.push_back({"w" + std::to_string(i), labels,
                    i % 2 == 0 ? Split::Train : Split::Test});
  }
  auto ds = dataset_of(rows);

  double lib_mean = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto [pred, report] = random_baseline(ds, inv, seed);
    lib_mean += report.metrics.at("micro_f1");
  }
  lib_mean /= 1000.0;

  // Independent simulation with a different RNG and the oracle F1.
  auto train = ds.split_examples(Split::Train);
  auto test = ds.split_examples(Split::Test);
  std::vector<double> prior(5, 0.0);
  for (const auto* e : train) {
    for (ClassId c : e->labels) prior[static_cast<std::size_t>(c)] += 1.0;
  }
  for (auto& p : prior) p /= static_cast<double>(train.size());

  std::mt19937_64 mt(424242);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double sim_mean = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::set<int>> sim_pred, sim_gold;
    for (const auto* e : test) {
      std::set<int> p;
      for (int c = 0; c < 5; ++c) {
        if (unif(mt) < prior[static_cast<std::size_t>(c)]) p.insert(c);
      }
      sim_pred.push_back(p);
      sim_gold.push_back(std::set<int>(e->labels.begin(), e->labels.end()));
    }
    sim_mean += oracles::micro_f1(sim_pred, sim_gold, 5);
  }
  sim_mean /= 1000.0;
  CHECK(std::abs(lib_mean - sim_mean) < 0.02 * sim_mean);
}

TEST_CASE("ambiguity probe normalizes vectors and reports accuracy bins") {
  auto inv = inventory_of(3);
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  std::vector<std::pair<std::string, std::vector<float>>> vecs;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    bool multi = i % 2 == 0;
    std::string w = "w" + std::to_string(i);
    std::vector<ClassId> labels = multi ? std::vector<ClassId>{0, 1}
                                        : std::vector<ClassId>{static_cast<ClassId>(i % 3)};
    rows.push_back({w, labels, i < 20 ? Split::Train : Split::Test});
    // Ambiguous words sit along (1,1,eps), unambiguous along (1,-1,eps).
    float eps = static_cast<float>(rng.uniform(-0.05, 0.05));
    float scale = static_cast<float>(rng.uniform(0.5, 5.0));  // norm must not leak
    std::vector<float> v = multi ? std::vector<float>{scale, scale, eps}
                                 : std::vector<float>{scale, -scale, eps};
    vecs.push_back({w, v});
  }
  auto ds = dataset_of(rows);
  auto table = table_of(vecs);
  auto [pred, report] = run_ambiguity_probe(table, ds, ClassifierKind::parse("mlp"), true, 3);
  CHECK(report.metrics.at("accuracy") >= 0.9);
  REQUIRE(!report.bins.empty());
  for (const auto& b : report.bins) {
    CHECK(b.value >= 0.0);
    CHECK(b.value <= 1.0);
  }
  for (double lik : pred.likelihoods) {
    CHECK(lik >= 0.0);
    CHECK(lik <= 1.0);
  }
}

TEST_CASE("normalized gather produces unit vectors and drops zero vectors") {
  auto inv = inventory_of(2);
  auto ds = dataset_of({
      {"a", {0}, Split::Train},
      {"b", {0, 1}, Split::Train},
      {"z", {1}, Split::Train},
      {"c", {0}, Split::Test},
      {"d", {0, 1}, Split::Test},
  });
  auto table = table_of({{"a", {3, 4}}, {"b", {0.1f, 0}}, {"z", {0, 0}},
                         {"c", {0, 2}}, {"d", {5, 12}}});
  auto [pred, report] = run_ambiguity_probe(table, ds, ClassifierKind::parse("knn"), true, 1);
  bool zero_warned = false;
  for (const auto& w : report.warnings) {
    if (w.find("zero vector") != std::string::npos) zero_warned = true;
  }
  CHECK(zero_warned);
}

TEST_CASE("ambiguity decisions are invariant to per-word positive rescaling") {
  auto inv = inventory_of(3);
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  std::vector<std::pair<std::string, std::vector<float>>> vecs, scaled;
  Rng rng(17);
  for (int i = 0; i < 30; ++i) {
    bool multi = i % 2 == 0;
    std::string w = "w" + std::to_string(i);
    rows.push_back({w, multi ? std::vector<ClassId>{0, 2} : std::vector<ClassId>{1},
                    i < 16 ? Split::Train : Split::Test});
    std::vector<float> v(4);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1)) + (multi ? 0.8f : -0.8f);
    vecs.push_back({w, v});
    float lambda = static_cast<float>(rng.uniform(0.2, 8.0));
    std::vector<float> sv(4);
    for (std::size_t j = 0; j < 4; ++j) sv[j] = v[j] * lambda;
    scaled.push_back({w, sv});
  }
  auto ds = dataset_of(rows);
  for (const char* clf : {"knn", "lr", "mlp"}) {
    auto [pa, ra] = run_ambiguity_probe(table_of(vecs), ds, ClassifierKind::parse(clf), true, 9);
    auto [pb, rb] = run_ambiguity_probe(table_of(scaled), ds, ClassifierKind::parse(clf), true, 9);
    INFO(clf);
    CHECK(pa.flags == pb.flags);
  }
}

TEST_CASE("frequency baseline: uninformative feature falls back to majority rate") {
  auto inv = inventory_of(2);
  SenseLexicon lex;
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  for (int i = 0; i < 24; ++i) {
    std::string w = "w" + std::to_string(i);
    bool multi = i % 3 == 0;  // 1/3 ambiguous
    if (multi) {
      lex.add(w, 0, 5);
      lex.add(w, 1, 5);  // total 10 for everyone
    } else {
      lex.add(w, 0, 10);
    }
    rows.push_back({w, multi ? std::vector<ClassId>{0, 1} : std::vector<ClassId>{0},
                    i % 2 == 0 ? Split::Train : Split::Test});
  }
  auto ds = dataset_of(rows);
  auto report = frequency_baseline(ds, lex);
  // Identical frequencies: the classifier can only predict one class.
  auto test = ds.split_examples(Split::Test);
  int multi = 0;
  for (const auto* e : test) multi += e->multiclass() ? 1 : 0;
  double majority = std::max(multi, static_cast<int>(test.size()) - multi) /
                    static_cast<double>(test.size());
  CHECK(report.metrics.at("accuracy") == Catch::Approx(majority));
}

TEST_CASE("frequency baseline separates 10x more frequent ambiguous words") {
  auto inv = inventory_of(2);
  SenseLexicon lex;
  std::vector<std::tuple<std::string, std::vector<ClassId>, Split>> rows;
  Rng rng(23);
  for (int i = 0; i < 60; ++i) {
    std::string w = "w" + std::to_string(i);
    bool multi = i % 2 == 0;
    std::uint64_t base = 20 + rng.bounded(10);
    if (multi) {
      lex.add(w, 0, base * 5);
      lex.add(w, 1, base * 5);  // ~10x total frequency
      rows.push_back({w, {0, 1}, i < 30 ? Split::Train : Split::Test});
    } else {
      lex.add(w, 0, base);
      rows.push_back({w, {0}, i < 30 ? Split::Train : Split::Test});
    }
  }
  auto ds = dataset_of(rows);

  // Threshold-search oracle: some cut on log-frequency separates the
  // groups perfectly.
  {
    auto test = ds.split_examples(Split::Test);
    double best = 0.0;
    for (const auto* cut_e : test) {
      double cut = std::log(static_cast<double>(lex.total(cut_e->word)) + 1.0);
      int correct = 0;
      for (const auto* e : test) {
        double f = std::log(static_cast<double>(lex.total(e->word)) + 1.0);
        bool predicted_multi = f >= cut;
        if (predicted_multi == e->multiclass()) ++correct;
      }
      best = std::max(best, correct / static_cast<double>(test.size()));
    }
    REQUIRE(best > 0.9);
  }
  auto report = frequency_baseline(ds, lex);
  CHECK(report.metrics.at("accuracy") > 0.9);
}

TEST_CASE("report json carries metrics and fingerprint") {
  auto s = perfect_setup(3, 6, 19);
  auto [pred, report] = run_sclass_probe(s.table, s.dataset, s.inv,
                                         ClassifierKind::parse("lr"), 3);
  auto j = report.to_json();
  CHECK(j["task"] == "sclass");
  CHECK(j["metrics"].contains("micro_f1"));
  CHECK(j["fingerprint"].get<std::string>().size() == 16);

  // Same inputs, same fingerprint; different seed, different fingerprint.
  auto [pred2, report2] = run_sclass_probe(s.table, s.dataset, s.inv,
                                           ClassifierKind::parse("lr"), 3);
  CHECK(report2.fingerprint == report.fingerprint);
  auto [pred3, report3] = run_sclass_probe(s.table, s.dataset, s.inv,
                                           ClassifierKind::parse("lr"), 4);
  CHECK(report3.fingerprint != report.fingerprint);
}
