#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "senseprobe/orchestrator.hpp"

using namespace senseprobe;
namespace fs = std::filesystem;

namespace {

// Tiny but complete experiment: synthetic corpus, one mode, one dim.
ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.out_dir = out_dir;
  cfg.synth = SynthSpec::basic(3, 6, 6, {0.8, 0.2}, 40, 6, 17);
  cfg.lexicon_min_freq = 5;
  cfg.dataset_seed = 3;
  cfg.train_modes = {EmbeddingMode::Skip};
  cfg.dims = {12};
  cfg.train.window = 3;
  cfg.train.negatives = 4;
  cfg.train.iterations = 2;
  cfg.train.min_count = 2;
  cfg.train.seed = 7;
  cfg.representations = {"word", "unif", "wght"};
  cfg.classifiers = {"lr", "knn"};
  cfg.probes = {"sclass", "ambiguity"};
  cfg.probe_seed = 5;
  cfg.mlp_hidden = 16;
  cfg.analysis_factors = {"dominance", "classes", "neighbors"};
  cfg.analysis_classifier = "lr";
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> tree_digests(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), root).string();
    if (rel == "manifest.json") continue;  // carries timings
    out[rel] = digest_file(entry.path().string());
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("end-to-end run produces a complete results table") {
  auto dir = fresh_dir("orch_run");
  auto cfg = tiny_config(dir.string());
  Orchestrator orch(cfg, 1);
  auto manifest = orch.run();

  REQUIRE(fs::exists(dir / "results.csv"));
  auto csv = slurp(dir / "results.csv");
  // 2 probes x 1 mode x 1 dim x 3 representations x 2 classifiers = 12 cells
  std::size_t rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  CHECK(rows == 12);
  CHECK(csv.find("failed") == std::string::npos);

  for (const char* f : {"corpus.jsonl", "word_corpus.txt", "sense_corpus.txt",
                        "lexicon.tsv", "dataset.tsv", "emb/word_skip_d12.vec",
                        "emb/unif_skip_d12.vec", "emb/wght_skip_d12.vec",
                        "reports/sclass_word_skip_d12_lr.json",
                        "reports/ambiguity_unif_skip_d12_knn.json",
                        "reports/sclass_random_baseline.json",
                        "reports/ambiguity_frequency_baseline.json",
                        "analysis/recall_dominance_word_skip_d12.csv",
                        "analysis/neighbors_word_skip_d12.csv",
                        "analysis/compatibility.csv", "manifest.json"}) {
    INFO(f);
    CHECK(fs::exists(dir / f));
  }

  for (const auto& s : manifest.stages) CHECK(s.executed);
}

TEST_CASE("unchanged re-run skips every stage with identical digests") {
  auto dir = fresh_dir("orch_skip");
  auto cfg = tiny_config(dir.string());
  Orchestrator(cfg, 1).run();
  auto before = tree_digests(dir);

  auto manifest = Orchestrator(cfg, 1).run();
  for (const auto& s : manifest.stages) {
    INFO(s.name);
    CHECK_FALSE(s.executed);
  }
  CHECK(tree_digests(dir) == before);
}

TEST_CASE("deleting one intermediate re-executes exactly its producer") {
  auto dir = fresh_dir("orch_delete");
  auto cfg = tiny_config(dir.string());
  Orchestrator(cfg, 1).run();
  auto before = tree_digests(dir);

  fs::remove(dir / "emb/word_skip_d12.vec");
  auto manifest = Orchestrator(cfg, 1).run();
  std::set<std::string> executed;
  for (const auto& s : manifest.stages) {
    if (s.executed) executed.insert(s.name);
  }
  // Only the producer of the deleted file re-runs; downstream stages see
  // an unchanged digest (deterministic regeneration) and skip.
  CHECK(executed == std::set<std::string>{"10_train_word_skip_d12"});
  CHECK(tree_digests(dir) == before);
}

TEST_CASE("config change invalidates the cache") {
  auto dir = fresh_dir("orch_cfgchange");
  auto cfg = tiny_config(dir.string());
  Orchestrator(cfg, 1).run();

  cfg.probe_seed = 6;
  auto manifest = Orchestrator(cfg, 1).run();
  std::size_t executed = 0;
  for (const auto& s : manifest.stages) executed += s.executed ? 1 : 0;
  CHECK(executed == manifest.stages.size());
}

TEST_CASE("two fresh runs from one config are byte-identical") {
  auto dir_a = fresh_dir("orch_det_a");
  auto dir_b = fresh_dir("orch_det_b");
  auto cfg_a = tiny_config(dir_a.string());
  auto cfg_b = tiny_config(dir_b.string());
  Orchestrator(cfg_a, 1).run();
  Orchestrator(cfg_b, 1).run();
  auto da = tree_digests(dir_a);
  auto db = tree_digests(dir_b);
  REQUIRE(da.size() == db.size());
  for (const auto& [rel, digest] : da) {
    INFO(rel);
    CHECK(db.at(rel) == digest);
  }
}

TEST_CASE("parallel jobs produce the same artifacts as sequential") {
  auto dir_seq = fresh_dir("orch_jobs_seq");
  auto dir_par = fresh_dir("orch_jobs_par");
  auto cfg_seq = tiny_config(dir_seq.string());
  auto cfg_par = tiny_config(dir_par.string());
  Orchestrator(cfg_seq, 1).run();
  Orchestrator(cfg_par, 2).run();
  CHECK(tree_digests(dir_seq) == tree_digests(dir_par));
}

TEST_CASE("config json round-trip preserves the hash") {
  auto cfg = tiny_config("somewhere");
  auto j = cfg.to_json();
  auto back = ExperimentConfig::from_json(j);
  CHECK(back.config_hash() == cfg.config_hash());
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(back.dims == cfg.dims);
  CHECK(back.representations == cfg.representations);
}

TEST_CASE("config validation rejects contradictory sources") {
  nlohmann::json j;
  j["out_dir"] = "x";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);

  j["corpus"] = {{"path", "a.jsonl"}};
  j["synth"] = tiny_config("x").synth->to_json();
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
}

#ifdef SENSEPROBE_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(SENSEPROBE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("cli drives the pipeline end to end") {
  auto dir = fresh_dir("cli_flow");
  fs::create_directories(dir);
  auto spec = SynthSpec::basic(3, 6, 6, {0.8, 0.2}, 40, 6, 23);
  {
    std::ofstream out(dir / "spec.json");
    out << spec.to_json().dump(2);
  }
  auto p = [&](const char* rel) { return (dir / rel).string(); };

  REQUIRE(run_cli("synth --spec " + p("spec.json") + " --out-corpus " + p("c.jsonl") +
                  " --out-lexicon " + p("gold.tsv") + " --out-inventory " + p("inv.txt")) == 0);
  REQUIRE(run_cli("corpus emit --in " + p("c.jsonl") + " --inventory " + p("inv.txt") +
                  " --mode word --out " + p("words.txt")) == 0);
  REQUIRE(run_cli("corpus emit --in " + p("c.jsonl") + " --inventory " + p("inv.txt") +
                  " --mode sense --out " + p("senses.txt")) == 0);
  REQUIRE(run_cli("dataset build --corpus " + p("c.jsonl") + " --inventory " + p("inv.txt") +
                  " --min-freq 5 --seed 3 --out " + p("dataset.tsv") +
                  " --out-lexicon " + p("lexicon.tsv")) == 0);
  REQUIRE(run_cli("train --in " + p("words.txt") + " --out " + p("word.vec") +
                  " --mode skip --dim 12 --window 3 --negatives 4 --iters 2"
                  " --min-count 2 --seed 7") == 0);
  REQUIRE(run_cli("train --in " + p("senses.txt") + " --out " + p("sense.vec") +
                  " --mode sskip --dim 12 --window 3 --negatives 4 --iters 2"
                  " --min-count 2 --seed 7") == 0);
  REQUIRE(run_cli("aggregate --mode unif --lexicon " + p("lexicon.tsv") +
                  " --senses " + p("sense.vec") + " --inventory " + p("inv.txt") +
                  " --out " + p("unif.vec") + " --coverage " + p("coverage.csv")) == 0);
  REQUIRE(run_cli("probe sclass --emb " + p("unif.vec") + " --dataset " + p("dataset.tsv") +
                  " --inventory " + p("inv.txt") + " --clf lr --seed 5 --report " +
                  p("sclass.json") + " --predictions " + p("pred.tsv") +
                  " --per-class " + p("perclass.csv") + " --random-baseline") == 0);
  REQUIRE(run_cli("probe ambiguity --emb " + p("word.vec") + " --dataset " + p("dataset.tsv") +
                  " --inventory " + p("inv.txt") + " --clf knn --normalize --lexicon " +
                  p("lexicon.tsv") + " --likelihoods " + p("lik.csv") +
                  " --frequency-baseline --report " + p("amb.json")) == 0);
  REQUIRE(run_cli("analyze --factor dominance --predictions " + p("pred.tsv") +
                  " --dataset " + p("dataset.tsv") + " --lexicon " + p("lexicon.tsv") +
                  " --inventory " + p("inv.txt") + " --out " + p("curve.csv")) == 0);
  REQUIRE(run_cli("analyze neighbors --emb " + p("word.vec") + " --lexicon " +
                  p("lexicon.tsv") + " --inventory " + p("inv.txt") + " --k 3 --out " +
                  p("neighbors.csv")) == 0);

  for (const char* rel : {"c.jsonl", "words.txt", "senses.txt", "dataset.tsv",
                          "lexicon.tsv", "word.vec", "sense.vec", "unif.vec",
                          "coverage.csv", "sclass.json", "pred.tsv", "perclass.csv",
                          "amb.json", "lik.csv", "curve.csv", "neighbors.csv"}) {
    INFO(rel);
    CHECK(fs::exists(dir / rel));
  }

  // `run` over a config file, exercised through the CLI as well.
  ExperimentConfig cfg = tiny_config((dir / "run_out").string());
  {
    std::ofstream out(dir / "config.json");
    out << cfg.to_json().dump(2);
  }
  REQUIRE(run_cli("run --config " + p("config.json") + " --jobs 2") == 0);
  CHECK(fs::exists(dir / "run_out/results.csv"));
}

TEST_CASE("cli rejects bad invocations") {
  CHECK(run_cli("corpus emit --mode nonsense") != 0);
  CHECK(run_cli("probe sclass") != 0);
  CHECK(run_cli("train --in /nonexistent/tokens.txt --out /tmp/x.vec") != 0);
}
#endif
