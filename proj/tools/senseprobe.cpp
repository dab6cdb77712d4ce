// Command-line front end for the sense-probing pipeline: corpus
// derivation, lexicon/dataset construction, embedding training,
// sense aggregation, probing and factor analysis.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "senseprobe/aggregate.hpp"
#include "senseprobe/analysis.hpp"
#include "senseprobe/corpus.hpp"
#include "senseprobe/dataset.hpp"
#include "senseprobe/embedding.hpp"
#include "senseprobe/lexicon.hpp"
#include "senseprobe/orchestrator.hpp"
#include "senseprobe/probes.hpp"
#include "senseprobe/synth.hpp"
#include "senseprobe/trainer.hpp"

namespace sp = senseprobe;

namespace {

sp::CorpusFormat parse_format(const std::string& f) {
  if (f == "jsonl") return sp::CorpusFormat::Jsonl;
  if (f == "tsv") return sp::CorpusFormat::Tsv;
  throw CLI::ValidationError("--format", "must be jsonl or tsv");
}

sp::ClassInventory load_inventory_arg(const std::string& arg) {
  if (arg.empty() || arg == "default") return sp::ClassInventory::default_inventory();
  return sp::ClassInventory::load(arg);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sense-probing toolkit for word embeddings"};
  app.require_subcommand(1);

  // ---- corpus emit ----------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "derived corpus construction");
  corpus_cmd->require_subcommand(1);
  auto* emit = corpus_cmd->add_subcommand("emit", "emit word or sense token corpus");
  std::string emit_in, emit_out, emit_mode = "word", emit_format = "jsonl";
  std::string emit_inventory = "default";
  bool emit_lowercase = true;
  std::size_t emit_min_annotated = 1;
  emit->add_option("--in", emit_in, "annotated corpus file")->required();
  emit->add_option("--out", emit_out, "output token file")->required();
  emit->add_option("--mode", emit_mode, "word|sense")->check(CLI::IsMember({"word", "sense"}));
  emit->add_option("--format", emit_format, "jsonl|tsv");
  emit->add_option("--inventory", emit_inventory, "class inventory file or 'default'");
  emit->add_flag("--lowercase,!--no-lowercase", emit_lowercase, "lowercase output (default on)");
  emit->add_option("--min-annotated", emit_min_annotated,
                   "keep sentences with at least this many mentions (0 keeps all)");
  emit->callback([&] {
    auto inv = load_inventory_arg(emit_inventory);
    auto sentences = sp::load_corpus(emit_in, parse_format(emit_format), inv);
    auto mode = emit_mode == "word" ? sp::StreamMode::Word : sp::StreamMode::Sense;
    auto stream = sp::emit_token_stream(sentences, mode, inv, emit_lowercase,
                                        emit_min_annotated);
    stream.save(emit_out);
    std::cerr << "wrote " << stream.sentences.size() << " sentences, "
              << stream.token_count() << " tokens to " << emit_out << "\n";
  });

  // ---- dataset build ---------------------------------------------------
  auto* dataset_cmd = app.add_subcommand("dataset", "probing dataset construction");
  dataset_cmd->require_subcommand(1);
  auto* build = dataset_cmd->add_subcommand("build", "build lexicon and balanced dataset");
  std::string ds_corpus, ds_lexicon_in, ds_format = "jsonl", ds_inventory = "default";
  std::string ds_out, ds_lexicon_out;
  std::uint64_t ds_min_freq = 20, ds_seed = 11;
  bool ds_lowercase = true;
  build->add_option("--corpus", ds_corpus, "annotated corpus to aggregate");
  build->add_option("--lexicon", ds_lexicon_in, "use an existing lexicon TSV instead");
  build->add_option("--format", ds_format, "jsonl|tsv");
  build->add_option("--inventory", ds_inventory, "class inventory file or 'default'");
  build->add_option("--min-freq", ds_min_freq, "minimum word mention frequency");
  build->add_option("--seed", ds_seed, "split/sampling seed");
  build->add_flag("--lowercase,!--no-lowercase", ds_lowercase, "lowercase words");
  build->add_option("--out", ds_out, "output dataset TSV")->required();
  build->add_option("--out-lexicon", ds_lexicon_out, "also write the lexicon TSV");
  build->callback([&] {
    auto inv = load_inventory_arg(ds_inventory);
    sp::SenseLexicon lexicon;
    if (!ds_lexicon_in.empty()) {
      lexicon = sp::SenseLexicon::load_tsv(ds_lexicon_in, inv);
    } else if (!ds_corpus.empty()) {
      auto sentences = sp::load_corpus(ds_corpus, parse_format(ds_format), inv);
      lexicon = sp::build_sense_lexicon(sentences, ds_min_freq, ds_lowercase);
    } else {
      throw CLI::ValidationError("dataset build", "need --corpus or --lexicon");
    }
    if (!ds_lexicon_out.empty()) lexicon.save_tsv(ds_lexicon_out, inv);
    std::vector<std::string> warnings;
    auto dataset = sp::build_probe_dataset(lexicon, ds_seed, &warnings);
    print_warnings(warnings);
    dataset.save_tsv(ds_out, inv);
    std::cerr << "dataset: " << dataset.split_size(sp::Split::Train) << " train / "
              << dataset.split_size(sp::Split::Test) << " test words\n";
  });

  // ---- train -------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train SkipGram/Structured SkipGram embeddings");
  std::string tr_in, tr_out, tr_mode = "skip";
  sp::TrainConfig tr_cfg;
  train->add_option("--in", tr_in, "token corpus (one sentence per line)")->required();
  train->add_option("--out", tr_out, "output embeddings (word2vec text)")->required();
  train->add_option("--mode", tr_mode, "skip|sskip")->check(CLI::IsMember({"skip", "sskip"}));
  train->add_option("--dim", tr_cfg.dim, "embedding dimension");
  train->add_option("--window", tr_cfg.window, "context window");
  train->add_option("--negatives", tr_cfg.negatives, "negative samples per positive");
  train->add_option("--iters", tr_cfg.iterations, "training epochs");
  train->add_option("--lr", tr_cfg.initial_lr, "initial learning rate");
  train->add_option("--min-count", tr_cfg.min_count, "vocabulary frequency cutoff");
  train->add_option("--subsample", tr_cfg.subsample_t, "frequency subsampling t (0 = off)");
  train->add_option("--workers", tr_cfg.workers, "worker threads");
  train->add_option("--seed", tr_cfg.seed, "RNG seed");
  train->callback([&] {
    auto stream = sp::TokenStream::load(tr_in);
    auto mode = tr_mode == "skip" ? sp::EmbeddingMode::Skip : sp::EmbeddingMode::Sskip;
    sp::TrainStats stats;
    auto table = sp::train_embeddings(stream, tr_cfg, mode, &stats);
    table.save_word2vec(tr_out);
    std::cerr << "trained " << table.vocab().size() << " x " << table.dim()
              << " (" << tr_mode << "), " << stats.pair_updates << " pair updates\n";
  });

  // ---- aggregate -----------------------------------------------------------
  auto* agg = app.add_subcommand("aggregate", "sum sense embeddings into word embeddings");
  std::string ag_mode = "unif", ag_lexicon, ag_senses, ag_out, ag_coverage;
  std::string ag_inventory = "default";
  agg->add_option("--mode", ag_mode, "unif|wght")->check(CLI::IsMember({"unif", "wght"}));
  agg->add_option("--lexicon", ag_lexicon, "lexicon TSV")->required();
  agg->add_option("--senses", ag_senses, "sense embedding file")->required();
  agg->add_option("--inventory", ag_inventory, "class inventory file or 'default'");
  agg->add_option("--out", ag_out, "output embeddings")->required();
  agg->add_option("--coverage", ag_coverage, "coverage report CSV");
  agg->callback([&] {
    auto inv = load_inventory_arg(ag_inventory);
    auto lexicon = sp::SenseLexicon::load_tsv(ag_lexicon, inv);
    auto senses = sp::EmbeddingTable::load_word2vec(ag_senses);
    std::vector<std::string> words;
    for (const auto& [w, counts] : lexicon) words.push_back(w);
    auto mode = ag_mode == "unif" ? sp::AggregateMode::Unif : sp::AggregateMode::Wght;
    sp::CoverageReport report;
    auto table = sp::build_aggregate_table(mode, lexicon, inv, senses, words, &report);
    table.save_word2vec(ag_out);
    if (!ag_coverage.empty()) report.write_csv(ag_coverage, inv);
    std::cerr << "aggregated " << report.words_covered << "/" << report.words_requested
              << " words (" << report.partial.size() << " partial, "
              << report.dropped.size() << " dropped)\n";
  });

  // ---- probe -----------------------------------------------------------------
  auto* probe = app.add_subcommand("probe", "diagnostic classification of embeddings");
  probe->require_subcommand(1);

  std::string pr_emb, pr_dataset, pr_clf = "mlp", pr_inventory = "default";
  std::string pr_report, pr_predictions, pr_perclass, pr_lexicon, pr_likelihoods;
  bool pr_normalize = false, pr_norm_set = false, pr_random_baseline = false;
  bool pr_frequency_baseline = false;
  std::uint64_t pr_seed = 5;
  int pr_knn_k = 5, pr_hidden = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--emb", pr_emb, "embedding file (word2vec text)")->required();
    cmd->add_option("--dataset", pr_dataset, "dataset TSV")->required();
    cmd->add_option("--clf", pr_clf, "lr|mlp|knn")->check(CLI::IsMember({"lr", "mlp", "knn"}));
    cmd->add_option("--inventory", pr_inventory, "class inventory file or 'default'");
    cmd->add_option("--seed", pr_seed, "classifier seed");
    cmd->add_option("--knn-k", pr_knn_k, "neighbors for KNN");
    cmd->add_option("--hidden", pr_hidden, "MLP hidden width (0 = auto)");
    cmd->add_flag("--normalize,!--no-normalize",
                  [&](std::int64_t count) {
                    pr_normalize = count > 0;
                    pr_norm_set = true;
                  },
                  "L2-normalize vectors before classification");
    cmd->add_option("--report", pr_report, "output report JSON");
  };

  auto make_kind = [&](int inventory_size) {
    sp::ClassifierKind kind = sp::ClassifierKind::parse(pr_clf);
    kind.knn.k = pr_knn_k;
    kind.mlp.hidden = pr_hidden > 0 ? pr_hidden : std::max(64, 2 * inventory_size);
    return kind;
  };

  auto* sclass = probe->add_subcommand("sclass", "per-class membership prediction");
  add_common(sclass);
  sclass->add_option("--predictions", pr_predictions, "output predicted label sets TSV");
  sclass->add_option("--per-class", pr_perclass, "output per-class F1 CSV");
  sclass->add_flag("--random-baseline", pr_random_baseline,
                   "also report the prior-sampling baseline");
  sclass->callback([&] {
    auto inv = load_inventory_arg(pr_inventory);
    auto table = sp::EmbeddingTable::load_word2vec(pr_emb);
    auto dataset = sp::ProbeDataset::load_tsv(pr_dataset, inv);
    bool normalize = pr_norm_set ? pr_normalize : false;  // raw vectors by default
    auto [pred, report] = sp::run_sclass_probe(table, dataset, inv, make_kind(inv.size()),
                                               pr_seed, normalize, 2);
    print_warnings(report.warnings);
    std::cout << "micro_f1 " << report.metrics.at("micro_f1") << "\n";
    if (!pr_report.empty()) report.save(pr_report);
    if (!pr_predictions.empty()) sp::save_predictions_tsv(pred, inv, pr_predictions);
    if (!pr_perclass.empty()) sp::write_per_class_csv(report, pr_perclass);
    if (pr_random_baseline) {
      auto [bpred, breport] = sp::random_baseline(dataset, inv, pr_seed);
      std::cout << "random_baseline_micro_f1 " << breport.metrics.at("micro_f1") << "\n";
    }
  });

  auto* ambiguity = probe->add_subcommand("ambiguity", "single- vs multi-sense prediction");
  add_common(ambiguity);
  ambiguity->add_option("--lexicon", pr_lexicon, "lexicon TSV (for frequencies)");
  ambiguity->add_option("--likelihoods", pr_likelihoods, "output per-word likelihood CSV");
  ambiguity->add_flag("--frequency-baseline", pr_frequency_baseline,
                      "also report the log-frequency LR baseline (needs --lexicon)");
  ambiguity->callback([&] {
    auto inv = load_inventory_arg(pr_inventory);
    auto table = sp::EmbeddingTable::load_word2vec(pr_emb);
    auto dataset = sp::ProbeDataset::load_tsv(pr_dataset, inv);
    bool normalize = pr_norm_set ? pr_normalize : true;  // normalized by default
    auto [pred, report] = sp::run_ambiguity_probe(table, dataset, make_kind(inv.size()),
                                                  normalize, pr_seed);
    print_warnings(report.warnings);
    std::cout << "accuracy " << report.metrics.at("accuracy") << "\n";
    if (!pr_report.empty()) report.save(pr_report);
    if (!pr_likelihoods.empty()) {
      if (pr_lexicon.empty()) {
        throw CLI::ValidationError("--likelihoods", "needs --lexicon for frequencies");
      }
      auto lexicon = sp::SenseLexicon::load_tsv(pr_lexicon, inv);
      sp::write_likelihood_csv(pred, dataset, lexicon, inv, pr_likelihoods);
    }
    if (pr_frequency_baseline) {
      if (pr_lexicon.empty()) {
        throw CLI::ValidationError("--frequency-baseline", "needs --lexicon");
      }
      auto lexicon = sp::SenseLexicon::load_tsv(pr_lexicon, inv);
      auto breport = sp::frequency_baseline(dataset, lexicon);
      std::cout << "frequency_baseline_accuracy " << breport.metrics.at("accuracy")
                << "\n";
    }
  });

  // ---- analyze ------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "slice probe results by factor");
  std::string an_factor, an_predictions, an_dataset, an_lexicon, an_out;
  std::string an_inventory = "default";
  analyze->add_option("--factor", an_factor, "dominance|classes|frequency|typicality")
      ->check(CLI::IsMember({"dominance", "classes", "frequency", "typicality"}));
  analyze->add_option("--predictions", an_predictions, "predicted label sets TSV");
  analyze->add_option("--dataset", an_dataset, "dataset TSV");
  analyze->add_option("--lexicon", an_lexicon, "lexicon TSV");
  analyze->add_option("--inventory", an_inventory, "class inventory file or 'default'");
  analyze->add_option("--out", an_out, "output curve CSV")->required();

  auto* neighbors = analyze->add_subcommand("neighbors", "top-k neighbor class diversity");
  std::string nb_emb, nb_lexicon, nb_out, nb_inventory = "default", nb_words_file;
  int nb_k = 5;
  neighbors->add_option("--emb", nb_emb, "embedding file")->required();
  neighbors->add_option("--lexicon", nb_lexicon, "lexicon TSV")->required();
  neighbors->add_option("--inventory", nb_inventory, "class inventory file or 'default'");
  neighbors->add_option("--k", nb_k, "neighborhood size");
  neighbors->add_option("--words", nb_words_file, "word list file (default: lexicon words in table)");
  neighbors->add_option("--out", nb_out, "output CSV")->required();
  neighbors->callback([&] {
    auto inv = load_inventory_arg(nb_inventory);
    auto table = sp::EmbeddingTable::load_word2vec(nb_emb);
    auto lexicon = sp::SenseLexicon::load_tsv(nb_lexicon, inv);
    std::vector<std::string> words;
    if (!nb_words_file.empty()) {
      std::ifstream in(nb_words_file);
      if (!in) throw std::runtime_error("cannot open word list: " + nb_words_file);
      std::string w;
      while (in >> w) words.push_back(w);
    } else {
      for (const auto& [w, counts] : lexicon) {
        if (table.vocab().id_of(w)) words.push_back(w);
      }
    }
    auto result = sp::neighbor_diversity(table, words, lexicon, nb_k);
    std::ofstream out(nb_out);
    if (!out) throw std::runtime_error("cannot write: " + nb_out);
    out << "word,unique_classes,neighbors_skipped\n";
    for (const auto& e : result.per_word) {
      out << e.word << "," << e.unique_classes << "," << e.neighbors_skipped << "\n";
    }
    std::cout << "mean_unique_classes " << result.mean_unique_classes << "\n";
  });

  analyze->callback([&] {
    if (analyze->get_subcommands().size() > 0) return;  // `analyze neighbors` ran
    if (an_factor.empty() || an_predictions.empty() || an_dataset.empty() ||
        an_lexicon.empty()) {
      throw CLI::ValidationError(
          "analyze", "needs --factor, --predictions, --dataset and --lexicon");
    }
    auto inv = load_inventory_arg(an_inventory);
    auto pred = sp::load_predictions_tsv(an_predictions, inv);
    auto dataset = sp::ProbeDataset::load_tsv(an_dataset, inv);
    auto lexicon = sp::SenseLexicon::load_tsv(an_lexicon, inv);
    sp::Factor factor = sp::parse_factor(an_factor);
    sp::FactorBinning binning;
    sp::CompatibilityMatrix compat;
    switch (factor) {
      case sp::Factor::Dominance:
        binning = sp::FactorBinning::dominance_default();
        break;
      case sp::Factor::NumClasses: {
        std::size_t maxk = 1;
        for (const auto& e : dataset.examples) maxk = std::max(maxk, e.labels.size());
        binning = sp::FactorBinning::num_classes_default(static_cast<int>(maxk));
        break;
      }
      case sp::Factor::Frequency: {
        std::uint64_t maxc = 0;
        for (const auto& [w, counts] : lexicon) {
          for (const auto& [cls, n] : counts) maxc = std::max(maxc, n);
        }
        binning = sp::FactorBinning::frequency_default(maxc);
        break;
      }
      case sp::Factor::Typicality:
        binning = sp::FactorBinning::typicality_default();
        compat = sp::CompatibilityMatrix(dataset, inv);
        break;
    }
    auto curve = sp::recall_by_factor(pred, dataset, lexicon, factor, binning, &compat);
    curve.write_csv(an_out);
    std::cout << "pairs " << curve.total_support() << " overall_recall "
              << (curve.total_support() > 0
                      ? static_cast<double>(curve.total_hits()) /
                            static_cast<double>(curve.total_support())
                      : 0.0)
              << "\n";
  });

  // ---- synth -----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated corpus");
  std::string sy_spec, sy_corpus = "synth_corpus.jsonl", sy_lexicon, sy_inventory_out;
  std::uint64_t sy_seed = 0;
  bool sy_seed_set = false;
  synth->add_option("--spec", sy_spec, "generator spec JSON")->required();
  synth->add_option("--seed", [&](const std::vector<std::string>& v) {
    sy_seed = std::stoull(v.front());
    sy_seed_set = true;
    return true;
  }, "override the spec seed");
  synth->add_option("--out-corpus", sy_corpus, "output corpus JSONL");
  synth->add_option("--out-lexicon", sy_lexicon, "output gold lexicon TSV");
  synth->add_option("--out-inventory", sy_inventory_out, "output class inventory");
  synth->callback([&] {
    auto spec = sp::SynthSpec::load(sy_spec);
    if (sy_seed_set) spec.seed = sy_seed;
    auto result = sp::generate(spec);
    sp::write_corpus_jsonl(result.sentences, result.inventory, sy_corpus);
    if (!sy_lexicon.empty()) result.gold.save_tsv(sy_lexicon, result.inventory);
    if (!sy_inventory_out.empty()) result.inventory.save(sy_inventory_out);
    std::cerr << "generated " << result.sentences.size() << " sentences ("
              << result.gold.size() << " lexicon words)\n";
  });

  // ---- run --------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run a full experiment from a config file");
  std::string run_config;
  int run_jobs = 1;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--jobs", run_jobs, "parallel grid cells");
  run->callback([&] {
    auto config = sp::ExperimentConfig::load(run_config);
    sp::Orchestrator orch(config, run_jobs);
    auto manifest = orch.run();
    std::size_t executed = 0;
    for (const auto& s : manifest.stages) executed += s.executed ? 1 : 0;
    std::cout << "stages " << manifest.stages.size() << " executed " << executed
              << " manifest " << config.out_dir << "/manifest.json\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
