#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "senseprobe/aggregate.hpp"
#include "senseprobe/analysis.hpp"
#include "senseprobe/corpus.hpp"
#include "senseprobe/dataset.hpp"
#include "senseprobe/lexicon.hpp"
#include "senseprobe/probes.hpp"
#include "senseprobe/synth.hpp"
#include "senseprobe/trainer.hpp"

namespace senseprobe {

// Declarative end-to-end experiment: corpus -> lexicon/dataset ->
// training grid -> aggregation -> probes -> factor analyses.
struct ExperimentConfig {
  std::string out_dir;
  std::string inventory = "default";  // "default" or a file path
  std::string corpus_path;            // empty when synthesizing
  CorpusFormat corpus_format = CorpusFormat::Jsonl;
  std::optional<SynthSpec> synth;
  bool lowercase = true;
  std::size_t min_annotated = 1;
  std::uint64_t lexicon_min_freq = 20;
  std::uint64_t dataset_seed = 11;

  std::vector<EmbeddingMode> train_modes = {EmbeddingMode::Skip, EmbeddingMode::Sskip};
  std::vector<int> dims = {100, 200, 300, 400};
  TrainConfig train;  // dim is overridden per grid cell

  std::vector<std::string> representations = {"word", "unif", "wght"};
  std::vector<std::string> classifiers = {"lr", "knn", "mlp"};
  std::vector<std::string> probes = {"sclass", "ambiguity"};
  std::uint64_t probe_seed = 5;
  bool normalize_ambiguity = true;
  int knn_k = 5;
  int mlp_hidden = 0;  // 0 = max(64, 2 * inventory size)

  std::vector<std::string> analysis_factors;
  int neighbors_k = 5;
  std::string analysis_classifier = "mlp";

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["out_dir"] = out_dir;
    j["inventory"] = inventory;
    if (!corpus_path.empty()) {
      j["corpus"] = {{"path", corpus_path},
                     {"format", corpus_format == CorpusFormat::Jsonl ? "jsonl" : "tsv"}};
    }
    if (synth) j["synth"] = synth->to_json();
    j["lowercase"] = lowercase;
    j["min_annotated"] = min_annotated;
    j["lexicon"] = {{"min_freq", lexicon_min_freq}};
    j["dataset"] = {{"seed", dataset_seed}};
    nlohmann::ordered_json jt;
    nlohmann::ordered_json modes = nlohmann::ordered_json::array();
    for (auto m : train_modes) modes.push_back(to_string(m));
    jt["modes"] = modes;
    jt["dims"] = dims;
    jt["window"] = train.window;
    jt["negatives"] = train.negatives;
    jt["iterations"] = train.iterations;
    jt["initial_lr"] = train.initial_lr;
    jt["min_count"] = train.min_count;
    jt["subsample_t"] = train.subsample_t;
    jt["seed"] = train.seed;
    jt["workers"] = train.workers;
    j["train"] = jt;
    j["representations"] = representations;
    j["classifiers"] = classifiers;
    j["probes"] = probes;
    j["probe"] = {{"seed", probe_seed},
                  {"normalize_ambiguity", normalize_ambiguity},
                  {"knn_k", knn_k},
                  {"mlp_hidden", mlp_hidden}};
    j["analysis"] = {{"factors", analysis_factors},
                     {"neighbors_k", neighbors_k},
                     {"classifier", analysis_classifier}};
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.out_dir = j.at("out_dir").get<std::string>();
    c.inventory = j.value("inventory", std::string("default"));
    if (j.contains("corpus")) {
      c.corpus_path = j["corpus"].at("path").get<std::string>();
      std::string f = j["corpus"].value("format", "jsonl");
      if (f == "jsonl") {
        c.corpus_format = CorpusFormat::Jsonl;
      } else if (f == "tsv") {
        c.corpus_format = CorpusFormat::Tsv;
      } else {
        throw std::invalid_argument("unknown corpus format: " + f);
      }
    }
    if (j.contains("synth")) c.synth = SynthSpec::from_json(j["synth"]);
    if (c.corpus_path.empty() && !c.synth) {
      throw std::invalid_argument("config needs either corpus.path or synth");
    }
    if (!c.corpus_path.empty() && c.synth) {
      throw std::invalid_argument("config cannot have both corpus.path and synth");
    }
    c.lowercase = j.value("lowercase", true);
    c.min_annotated = j.value("min_annotated", std::size_t{1});
    if (j.contains("lexicon")) c.lexicon_min_freq = j["lexicon"].value("min_freq", 20ULL);
    if (j.contains("dataset")) c.dataset_seed = j["dataset"].value("seed", 11ULL);
    if (j.contains("train")) {
      const auto& jt = j["train"];
      if (jt.contains("modes")) {
        c.train_modes.clear();
        for (const auto& m : jt["modes"]) {
          std::string name = m.get<std::string>();
          if (name == "skip") {
            c.train_modes.push_back(EmbeddingMode::Skip);
          } else if (name == "sskip") {
            c.train_modes.push_back(EmbeddingMode::Sskip);
          } else {
            throw std::invalid_argument("unknown train mode: " + name);
          }
        }
      }
      if (jt.contains("dims")) c.dims = jt["dims"].get<std::vector<int>>();
      c.train.window = jt.value("window", 5);
      c.train.negatives = jt.value("negatives", 10);
      c.train.iterations = jt.value("iterations", 5);
      c.train.initial_lr = jt.value("initial_lr", 0.025f);
      c.train.min_count = jt.value("min_count", 5ULL);
      c.train.subsample_t = jt.value("subsample_t", 0.0);
      c.train.seed = jt.value("seed", 1ULL);
      c.train.workers = jt.value("workers", 1);
    }
    if (j.contains("representations")) {
      c.representations = j["representations"].get<std::vector<std::string>>();
    }
    if (j.contains("classifiers")) {
      c.classifiers = j["classifiers"].get<std::vector<std::string>>();
    }
    if (j.contains("probes")) c.probes = j["probes"].get<std::vector<std::string>>();
    if (j.contains("probe")) {
      c.probe_seed = j["probe"].value("seed", 5ULL);
      c.normalize_ambiguity = j["probe"].value("normalize_ambiguity", true);
      c.knn_k = j["probe"].value("knn_k", 5);
      c.mlp_hidden = j["probe"].value("mlp_hidden", 0);
    }
    if (j.contains("analysis")) {
      c.analysis_factors = j["analysis"].value("factors", std::vector<std::string>{});
      c.neighbors_k = j["analysis"].value("neighbors_k", 5);
      c.analysis_classifier = j["analysis"].value("classifier", std::string("mlp"));
    }
    for (const auto& r : c.representations) {
      if (r != "word" && r != "unif" && r != "wght") {
        throw std::invalid_argument("unknown representation: " + r);
      }
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  std::string config_hash() const { return to_hex(fnv1a64(to_json().dump())); }
};

struct FileDigest {
  std::string path;  // relative to out_dir where applicable
  std::string digest;
};

struct StageRecord {
  std::string name;
  bool executed = false;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::int64_t duration_ms = 0;
  std::vector<std::string> warnings;
};

struct RunManifest {
  std::string config_hash;
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    auto& js = j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : stages) {
      nlohmann::ordered_json st;
      st["name"] = s.name;
      st["executed"] = s.executed;
      auto files = [](const std::vector<FileDigest>& fs) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& f : fs) arr.push_back({{"path", f.path}, {"digest", f.digest}});
        return arr;
      };
      st["inputs"] = files(s.inputs);
      st["outputs"] = files(s.outputs);
      st["duration_ms"] = s.duration_ms;
      st["warnings"] = s.warnings;
      js.push_back(std::move(st));
    }
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << to_json().dump(2) << "\n";
  }

  static std::optional<RunManifest> load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    RunManifest m;
    m.config_hash = j.value("config_hash", "");
    for (const auto& js : j.value("stages", nlohmann::json::array())) {
      StageRecord s;
      s.name = js.value("name", "");
      s.executed = js.value("executed", false);
      for (const auto& f : js.value("inputs", nlohmann::json::array())) {
        s.inputs.push_back({f.value("path", ""), f.value("digest", "")});
      }
      for (const auto& f : js.value("outputs", nlohmann::json::array())) {
        s.outputs.push_back({f.value("path", ""), f.value("digest", "")});
      }
      s.duration_ms = js.value("duration_ms", 0);
      for (const auto& w : js.value("warnings", nlohmann::json::array())) {
        s.warnings.push_back(w.get<std::string>());
      }
      m.stages.push_back(std::move(s));
    }
    return m;
  }
};

// Runs the configured stages in dependency order. A stage is skipped
// when its recorded input digests and all of its outputs match the
// previous manifest (content-keyed resumability). Independent grid cells
// run in parallel up to the job budget.
class Orchestrator {
 public:
  explicit Orchestrator(ExperimentConfig config, int jobs = 1)
      : cfg_(std::move(config)), jobs_(jobs < 1 ? 1 : jobs) {}

  RunManifest run() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out_dir);
    fs::create_directories(path("emb"));
    fs::create_directories(path("reports"));
    fs::create_directories(path("predictions"));
    fs::create_directories(path("analysis"));

    prev_ = RunManifest::load(path("manifest.json")).value_or(RunManifest{});
    if (prev_.config_hash != cfg_.config_hash()) prev_ = RunManifest{};
    cur_ = RunManifest{};
    cur_.config_hash = cfg_.config_hash();

    try {
      run_stages();
    } catch (const std::exception& e) {
      finalize_manifest();
      cur_.save(path("manifest.json"));
      throw std::runtime_error(std::string("stage '") + current_stage_ +
                               "' failed: " + e.what());
    }
    finalize_manifest();
    cur_.save(path("manifest.json"));
    return cur_;
  }

 private:
  struct Cell {
    EmbeddingMode mode;
    int dim;
    std::string rep;  // word | unif | wght
  };

  std::string path(const std::string& rel) const {
    return (std::filesystem::path(cfg_.out_dir) / rel).string();
  }

  static std::string cell_tag(EmbeddingMode mode, int dim) {
    return std::string(to_string(mode)) + "_d" + std::to_string(dim);
  }

  ClassInventory load_inventory() const {
    if (cfg_.inventory == "default") {
      if (cfg_.synth) return cfg_.synth->inventory();
      return ClassInventory::default_inventory();
    }
    return ClassInventory::load(cfg_.inventory);
  }

  bool want_rep(const std::string& r) const {
    return std::find(cfg_.representations.begin(), cfg_.representations.end(), r) !=
           cfg_.representations.end();
  }
  bool want_probe(const std::string& p) const {
    return std::find(cfg_.probes.begin(), cfg_.probes.end(), p) != cfg_.probes.end();
  }

  ClassifierKind make_kind(const std::string& name, int inventory_size) const {
    ClassifierKind kind = ClassifierKind::parse(name);
    kind.knn.k = cfg_.knn_k;
    kind.mlp.hidden =
        cfg_.mlp_hidden > 0 ? cfg_.mlp_hidden : std::max(64, 2 * inventory_size);
    return kind;
  }

  // Skips the stage when inputs and outputs are unchanged since the last
  // run; otherwise executes fn and digests the produced outputs.
  void run_stage(const std::string& name, const std::vector<std::string>& inputs,
                 const std::vector<std::string>& outputs,
                 const std::function<void(StageRecord&)>& fn) {
    StageRecord rec;
    rec.name = name;
    rec.inputs.push_back({"<config>", cur_.config_hash});
    for (const auto& in : inputs) rec.inputs.push_back({in, digest_file(in)});

    const StageRecord* old = prev_.find(name);
    bool can_skip = old != nullptr && old->inputs.size() == rec.inputs.size();
    if (can_skip) {
      for (std::size_t i = 0; i < rec.inputs.size(); ++i) {
        if (old->inputs[i].path != rec.inputs[i].path ||
            old->inputs[i].digest != rec.inputs[i].digest) {
          can_skip = false;
          break;
        }
      }
    }
    if (can_skip && old->outputs.size() == outputs.size()) {
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (old->outputs[i].path != outputs[i] ||
            !std::filesystem::exists(outputs[i]) ||
            digest_file(outputs[i]) != old->outputs[i].digest) {
          can_skip = false;
          break;
        }
      }
    } else {
      can_skip = false;
    }

    if (can_skip) {
      rec.executed = false;
      rec.outputs = old->outputs;
      rec.warnings = old->warnings;
      record(std::move(rec));
      return;
    }

    {
      std::lock_guard<std::mutex> lock(mu_);
      current_stage_ = name;
    }
    auto t0 = std::chrono::steady_clock::now();
    fn(rec);
    auto t1 = std::chrono::steady_clock::now();
    rec.duration_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    rec.executed = true;
    for (const auto& out : outputs) rec.outputs.push_back({out, digest_file(out)});
    record(std::move(rec));
  }

  void record(StageRecord rec) {
    std::lock_guard<std::mutex> lock(mu_);
    cur_.stages.push_back(std::move(rec));
  }

  void finalize_manifest() {
    std::sort(cur_.stages.begin(), cur_.stages.end(),
              [](const StageRecord& a, const StageRecord& b) { return a.name < b.name; });
  }

  void run_stages() {
    const ClassInventory inv = load_inventory();

    // -- corpus --------------------------------------------------------
    std::string corpus_file = cfg_.corpus_path;
    CorpusFormat corpus_format = cfg_.corpus_format;
    if (cfg_.synth) {
      corpus_file = path("corpus.jsonl");
      corpus_format = CorpusFormat::Jsonl;
      run_stage("00_synth", {},
                {corpus_file, path("gold_lexicon.tsv"), path("inventory.txt")},
                [&](StageRecord&) {
                  auto result = generate(*cfg_.synth);
                  write_corpus_jsonl(result.sentences, result.inventory, corpus_file);
                  result.gold.save_tsv(path("gold_lexicon.tsv"), result.inventory);
                  result.inventory.save(path("inventory.txt"));
                });
    }

    const std::string word_corpus = path("word_corpus.txt");
    const std::string sense_corpus = path("sense_corpus.txt");
    const std::string lexicon_file = path("lexicon.tsv");
    const std::string dataset_file = path("dataset.tsv");

    bool need_sense = want_rep("unif") || want_rep("wght");

    run_stage("01_emit_word", {corpus_file}, {word_corpus}, [&](StageRecord&) {
      auto sentences = load_corpus(corpus_file, corpus_format, inv);
      emit_token_stream(sentences, StreamMode::Word, inv, cfg_.lowercase,
                        cfg_.min_annotated)
          .save(word_corpus);
    });
    if (need_sense) {
      run_stage("02_emit_sense", {corpus_file}, {sense_corpus}, [&](StageRecord&) {
        auto sentences = load_corpus(corpus_file, corpus_format, inv);
        emit_token_stream(sentences, StreamMode::Sense, inv, cfg_.lowercase,
                          cfg_.min_annotated)
            .save(sense_corpus);
      });
    }
    run_stage("03_lexicon", {corpus_file}, {lexicon_file}, [&](StageRecord&) {
      auto sentences = load_corpus(corpus_file, corpus_format, inv);
      build_sense_lexicon(sentences, cfg_.lexicon_min_freq, cfg_.lowercase)
          .save_tsv(lexicon_file, inv);
    });
    run_stage("04_dataset", {lexicon_file}, {dataset_file}, [&](StageRecord& rec) {
      auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
      auto dataset = build_probe_dataset(lexicon, cfg_.dataset_seed, &rec.warnings);
      dataset.save_tsv(dataset_file, inv);
    });

    // -- training grid --------------------------------------------------
    std::vector<Cell> train_cells;
    for (auto mode : cfg_.train_modes) {
      for (int dim : cfg_.dims) train_cells.push_back({mode, dim, ""});
    }
    parallel_for(train_cells.size(), jobs_, [&](std::size_t i) {
      const auto& cell = train_cells[i];
      std::string tag = cell_tag(cell.mode, cell.dim);
      if (want_rep("word")) {
        std::string out = path("emb/word_" + tag + ".vec");
        run_stage("10_train_word_" + tag, {word_corpus}, {out}, [&](StageRecord&) {
          TrainConfig tc = cfg_.train;
          tc.dim = cell.dim;
          auto stream = TokenStream::load(word_corpus, StreamMode::Word);
          train_embeddings(stream, tc, cell.mode).save_word2vec(out);
        });
      }
      if (need_sense) {
        std::string out = path("emb/sense_" + tag + ".vec");
        run_stage("11_train_sense_" + tag, {sense_corpus}, {out}, [&](StageRecord&) {
          TrainConfig tc = cfg_.train;
          tc.dim = cell.dim;
          auto stream = TokenStream::load(sense_corpus, StreamMode::Sense);
          train_embeddings(stream, tc, cell.mode).save_word2vec(out);
        });
      }
    });

    // -- aggregation ----------------------------------------------------
    std::vector<std::pair<Cell, AggregateMode>> agg_cells;
    for (auto mode : cfg_.train_modes) {
      for (int dim : cfg_.dims) {
        if (want_rep("unif")) agg_cells.push_back({{mode, dim, "unif"}, AggregateMode::Unif});
        if (want_rep("wght")) agg_cells.push_back({{mode, dim, "wght"}, AggregateMode::Wght});
      }
    }
    parallel_for(agg_cells.size(), jobs_, [&](std::size_t i) {
      const auto& [cell, agg] = agg_cells[i];
      std::string tag = cell_tag(cell.mode, cell.dim);
      std::string sense_vec = path("emb/sense_" + tag + ".vec");
      std::string out = path("emb/" + cell.rep + "_" + tag + ".vec");
      std::string coverage = path("emb/coverage_" + cell.rep + "_" + tag + ".csv");
      run_stage("20_aggregate_" + cell.rep + "_" + tag, {sense_vec, lexicon_file},
                {out, coverage}, [&](StageRecord& rec) {
                  auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
                  auto sense_table = EmbeddingTable::load_word2vec(sense_vec);
                  std::vector<std::string> words;
                  for (const auto& [w, counts] : lexicon) words.push_back(w);
                  CoverageReport report;
                  auto table = build_aggregate_table(agg, lexicon, inv, sense_table,
                                                     words, &report);
                  table.save_word2vec(out);
                  report.write_csv(coverage, inv);
                  if (!report.dropped.empty()) {
                    rec.warnings.push_back(std::to_string(report.dropped.size()) +
                                           " words had no sense vectors");
                  }
                });
    });

    // -- probes -----------------------------------------------------------
    struct ProbeCell {
      Cell cell;
      std::string clf;
      std::string probe;
    };
    std::vector<ProbeCell> probe_cells;
    for (auto mode : cfg_.train_modes) {
      for (int dim : cfg_.dims) {
        for (const auto& rep : cfg_.representations) {
          for (const auto& clf : cfg_.classifiers) {
            for (const auto& probe : cfg_.probes) {
              probe_cells.push_back({{mode, dim, rep}, clf, probe});
            }
          }
        }
      }
    }
    std::vector<std::string> failed_cells;
    std::mutex fail_mu;
    parallel_for(probe_cells.size(), jobs_, [&](std::size_t i) {
      const auto& pc = probe_cells[i];
      std::string tag = cell_tag(pc.cell.mode, pc.cell.dim);
      std::string emb = path("emb/" + pc.cell.rep + "_" + tag + ".vec");
      std::string base = pc.probe + "_" + pc.cell.rep + "_" + tag + "_" + pc.clf;
      std::string report_file = path("reports/" + base + ".json");
      try {
        if (pc.probe == "sclass") {
          std::string pred_file = path("predictions/" + base + ".tsv");
          std::string perclass = path("reports/perclass_" + base + ".csv");
          run_stage("30_probe_" + base, {emb, dataset_file},
                    {report_file, pred_file, perclass}, [&](StageRecord& rec) {
                      auto table = EmbeddingTable::load_word2vec(emb);
                      auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                      auto kind = make_kind(pc.clf, inv.size());
                      auto [pred, report] = run_sclass_probe(
                          table, dataset, inv, kind, cfg_.probe_seed, false, 1);
                      report.save(report_file);
                      save_predictions_tsv(pred, inv, pred_file);
                      write_per_class_csv(report, perclass);
                      rec.warnings = report.warnings;
                    });
        } else if (pc.probe == "ambiguity") {
          std::string lik = path("reports/likelihood_" + base + ".csv");
          run_stage("31_probe_" + base, {emb, dataset_file, lexicon_file},
                    {report_file, lik}, [&](StageRecord& rec) {
                      auto table = EmbeddingTable::load_word2vec(emb);
                      auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                      auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
                      auto kind = make_kind(pc.clf, inv.size());
                      auto [pred, report] = run_ambiguity_probe(
                          table, dataset, kind, cfg_.normalize_ambiguity,
                          cfg_.probe_seed);
                      report.save(report_file);
                      write_likelihood_csv(pred, dataset, lexicon, inv, lik);
                      rec.warnings = report.warnings;
                    });
        } else {
          throw std::invalid_argument("unknown probe: " + pc.probe);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mu);
        failed_cells.push_back(base + ": " + e.what());
      }
    });

    // -- baselines --------------------------------------------------------
    if (want_probe("sclass")) {
      std::string out = path("reports/sclass_random_baseline.json");
      run_stage("40_baseline_random", {dataset_file}, {out}, [&](StageRecord&) {
        auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
        auto [pred, report] = random_baseline(dataset, inv, cfg_.probe_seed);
        report.save(out);
      });
    }
    if (want_probe("ambiguity")) {
      std::string out = path("reports/ambiguity_frequency_baseline.json");
      run_stage("41_baseline_frequency", {dataset_file, lexicon_file}, {out},
                [&](StageRecord&) {
                  auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                  auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
                  frequency_baseline(dataset, lexicon).save(out);
                });
    }

    // -- analyses ---------------------------------------------------------
    if (!cfg_.analysis_factors.empty() && want_probe("sclass")) {
      run_stage("50_compatibility", {dataset_file},
                {path("analysis/compatibility.csv")}, [&](StageRecord&) {
                  auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                  CompatibilityMatrix(dataset, inv)
                      .write_csv(path("analysis/compatibility.csv"), inv);
                });

      struct AnalysisCell {
        Cell cell;
        std::string factor;
      };
      std::vector<AnalysisCell> analysis_cells;
      for (auto mode : cfg_.train_modes) {
        for (int dim : cfg_.dims) {
          for (const auto& rep : cfg_.representations) {
            for (const auto& factor : cfg_.analysis_factors) {
              if (factor == "neighbors") continue;
              analysis_cells.push_back({{mode, dim, rep}, factor});
            }
          }
        }
      }
      parallel_for(analysis_cells.size(), jobs_, [&](std::size_t i) {
        const auto& ac = analysis_cells[i];
        std::string tag = cell_tag(ac.cell.mode, ac.cell.dim);
        std::string base =
            "sclass_" + ac.cell.rep + "_" + tag + "_" + cfg_.analysis_classifier;
        std::string pred_file = path("predictions/" + base + ".tsv");
        if (!std::filesystem::exists(pred_file)) return;  // cell failed upstream
        std::string out =
            path("analysis/recall_" + ac.factor + "_" + ac.cell.rep + "_" + tag + ".csv");
        run_stage("51_analyze_" + ac.factor + "_" + ac.cell.rep + "_" + tag,
                  {pred_file, dataset_file, lexicon_file}, {out}, [&](StageRecord&) {
                    auto pred = load_predictions_tsv(pred_file, inv);
                    auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                    auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
                    Factor factor = parse_factor(ac.factor);
                    FactorBinning binning;
                    CompatibilityMatrix compat;
                    switch (factor) {
                      case Factor::Dominance:
                        binning = FactorBinning::dominance_default();
                        break;
                      case Factor::NumClasses: {
                        std::size_t maxk = 1;
                        for (const auto& e : dataset.examples) {
                          maxk = std::max(maxk, e.labels.size());
                        }
                        binning = FactorBinning::num_classes_default(
                            static_cast<int>(maxk));
                        break;
                      }
                      case Factor::Frequency: {
                        std::uint64_t maxc = 0;
                        for (const auto& [w, counts] : lexicon) {
                          for (const auto& [cls, n] : counts) maxc = std::max(maxc, n);
                        }
                        binning = FactorBinning::frequency_default(maxc);
                        break;
                      }
                      case Factor::Typicality:
                        binning = FactorBinning::typicality_default();
                        compat = CompatibilityMatrix(dataset, inv);
                        break;
                    }
                    auto curve = recall_by_factor(pred, dataset, lexicon, factor,
                                                  binning, &compat);
                    curve.write_csv(out);
                  });
      });
    }

    if (std::find(cfg_.analysis_factors.begin(), cfg_.analysis_factors.end(),
                  "neighbors") != cfg_.analysis_factors.end()) {
      for (auto mode : cfg_.train_modes) {
        for (int dim : cfg_.dims) {
          std::string tag = cell_tag(mode, dim);
          std::string emb = path("emb/word_" + tag + ".vec");
          if (!std::filesystem::exists(emb)) continue;
          std::string out = path("analysis/neighbors_word_" + tag + ".csv");
          run_stage("52_analyze_neighbors_word_" + tag, {emb, dataset_file, lexicon_file},
                    {out}, [&](StageRecord&) {
                      auto table = EmbeddingTable::load_word2vec(emb);
                      auto dataset = ProbeDataset::load_tsv(dataset_file, inv);
                      auto lexicon = SenseLexicon::load_tsv(lexicon_file, inv);
                      std::vector<std::string> words;
                      for (const auto& e : dataset.examples) {
                        if (table.vocab().id_of(e.word)) words.push_back(e.word);
                      }
                      auto result = neighbor_diversity(table, words, lexicon,
                                                       cfg_.neighbors_k);
                      std::ofstream os(out);
                      os << "word,unique_classes,neighbors_skipped\n";
                      for (const auto& e : result.per_word) {
                        os << e.word << "," << e.unique_classes << ","
                           << e.neighbors_skipped << "\n";
                      }
                      char buf[32];
                      std::snprintf(buf, sizeof(buf), "%.6f", result.mean_unique_classes);
                      os << "MEAN," << buf << ",\n";
                    });
        }
      }
    }

    // -- results table ------------------------------------------------------
    assemble_results(failed_cells);
  }

  // Long-form CSV over the full grid; cells whose report is missing get
  // an explicit failure row.
  void assemble_results(const std::vector<std::string>& failed_cells) {
    std::vector<std::string> report_inputs;
    struct Row {
      std::string probe, mode, rep, clf;
      int dim;
      std::string status;
      double value = 0.0;
    };
    std::vector<Row> rows;
    for (const auto& probe : cfg_.probes) {
      for (auto mode : cfg_.train_modes) {
        for (int dim : cfg_.dims) {
          for (const auto& rep : cfg_.representations) {
            for (const auto& clf : cfg_.classifiers) {
              std::string base =
                  probe + "_" + rep + "_" + cell_tag(mode, dim) + "_" + clf;
              std::string file = path("reports/" + base + ".json");
              Row row{probe, to_string(mode), rep, clf, dim, "failed", 0.0};
              if (std::filesystem::exists(file)) {
                std::ifstream in(file);
                nlohmann::json j;
                in >> j;
                const char* metric = probe == "sclass" ? "micro_f1" : "accuracy";
                if (j.contains("metrics") && j["metrics"].contains(metric)) {
                  row.value = j["metrics"][metric].get<double>();
                  row.status = "ok";
                  report_inputs.push_back(file);
                }
              }
              rows.push_back(std::move(row));
            }
          }
        }
      }
    }

    std::string out = path("results.csv");
    run_stage("60_results", report_inputs, {out}, [&](StageRecord& rec) {
      std::ofstream os(out);
      os << "probe,embedding,dim,representation,classifier,metric,value,status\n";
      char buf[32];
      for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.value);
        os << r.probe << "," << r.mode << "," << r.dim << "," << r.rep << ","
           << r.clf << "," << (r.probe == "sclass" ? "micro_f1" : "accuracy") << ","
           << (r.status == "ok" ? buf : "") << "," << r.status << "\n";
      }
      for (const auto& f : failed_cells) rec.warnings.push_back("failed cell: " + f);
    });
  }

  ExperimentConfig cfg_;
  int jobs_;
  RunManifest prev_;
  RunManifest cur_;
  std::mutex mu_;
  std::string current_stage_;
};

}  // namespace senseprobe
