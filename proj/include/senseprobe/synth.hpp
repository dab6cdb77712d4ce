#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "senseprobe/corpus.hpp"
#include "senseprobe/inventory.hpp"
#include "senseprobe/lexicon.hpp"

namespace senseprobe {

struct SynthWord {
  std::string surface;
  std::vector<int> classes;      // indices into SynthSpec::class_names
  std::vector<double> probs;     // sense distribution, sums to 1
};

// Generator spec for a synthetic annotated corpus with known ground
// truth: every class owns a disjoint context-word pool, and each mention
// of a word samples a class from the word's sense distribution and draws
// its sentence context from that class's pool.
struct SynthSpec {
  std::vector<std::string> class_names;
  int context_vocab_per_class = 50;
  double context_overlap = 0.0;  // fraction of context tokens from a shared pool
  std::vector<SynthWord> words;
  int mentions_per_word = 100;
  int sentence_length = 10;
  std::uint64_t seed = 1;

  void validate() const {
    if (class_names.empty()) throw std::invalid_argument("no classes in spec");
    if (context_vocab_per_class < 1) {
      throw std::invalid_argument("context_vocab_per_class must be >= 1");
    }
    if (mentions_per_word < 1) throw std::invalid_argument("mentions_per_word must be >= 1");
    if (sentence_length < 2) throw std::invalid_argument("sentence_length must be >= 2");
    if (context_overlap < 0.0 || context_overlap > 1.0) {
      throw std::invalid_argument("context_overlap must be in [0,1]");
    }
    if (words.empty()) throw std::invalid_argument("no words in spec");
    for (const auto& w : words) {
      if (w.surface.empty()) throw std::invalid_argument("empty surface form");
      if (w.classes.empty() || w.classes.size() != w.probs.size()) {
        throw std::invalid_argument("word '" + w.surface +
                                    "': classes and probs must align and be non-empty");
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < w.classes.size(); ++i) {
        if (w.classes[i] < 0 || w.classes[i] >= static_cast<int>(class_names.size())) {
          throw std::invalid_argument("word '" + w.surface + "': class index out of range");
        }
        if (w.probs[i] <= 0.0) {
          throw std::invalid_argument("word '" + w.surface + "': probs must be positive");
        }
        sum += w.probs[i];
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("word '" + w.surface + "': probs must sum to 1");
      }
    }
  }

  ClassInventory inventory() const { return ClassInventory(class_names); }

  // Convenience builder: n_classes classes named class_00.., singles_per_class
  // single-sense words per class, plus n_multi words whose class sets are
  // assigned round-robin with the given sense distribution.
  static SynthSpec basic(int n_classes, int singles_per_class, int n_multi,
                         const std::vector<double>& multi_probs,
                         int mentions_per_word, int sentence_length,
                         std::uint64_t seed) {
    SynthSpec spec;
    char buf[64];
    for (int c = 0; c < n_classes; ++c) {
      std::snprintf(buf, sizeof(buf), "class_%02d", c);
      spec.class_names.push_back(buf);
    }
    for (int c = 0; c < n_classes; ++c) {
      for (int i = 0; i < singles_per_class; ++i) {
        SynthWord w;
        std::snprintf(buf, sizeof(buf), "single_%02d_%03d", c, i);
        w.surface = buf;
        w.classes = {c};
        w.probs = {1.0};
        spec.words.push_back(std::move(w));
      }
    }
    int k = static_cast<int>(multi_probs.size());
    if (n_multi > 0 && (k < 2 || k > n_classes)) {
      throw std::invalid_argument("multi_probs size must be in [2, n_classes]");
    }
    for (int i = 0; i < n_multi; ++i) {
      SynthWord w;
      std::snprintf(buf, sizeof(buf), "multi_%03d", i);
      w.surface = buf;
      for (int j = 0; j < k; ++j) w.classes.push_back((i + j) % n_classes);
      w.probs = multi_probs;
      spec.words.push_back(std::move(w));
    }
    spec.mentions_per_word = mentions_per_word;
    spec.sentence_length = sentence_length;
    spec.seed = seed;
    return spec;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["classes"] = class_names;
    j["context_vocab_per_class"] = context_vocab_per_class;
    j["context_overlap"] = context_overlap;
    j["mentions_per_word"] = mentions_per_word;
    j["sentence_length"] = sentence_length;
    j["seed"] = seed;
    auto& ws = j["words"] = nlohmann::ordered_json::array();
    for (const auto& w : words) {
      nlohmann::ordered_json jw;
      jw["surface"] = w.surface;
      nlohmann::ordered_json cs = nlohmann::ordered_json::array();
      for (int c : w.classes) cs.push_back(class_names.at(static_cast<std::size_t>(c)));
      jw["classes"] = cs;
      jw["probs"] = w.probs;
      ws.push_back(std::move(jw));
    }
    return j;
  }

  static SynthSpec from_json(const nlohmann::json& j) {
    SynthSpec spec;
    for (const auto& c : j.at("classes")) spec.class_names.push_back(c.get<std::string>());
    spec.context_vocab_per_class = j.value("context_vocab_per_class", 50);
    spec.context_overlap = j.value("context_overlap", 0.0);
    spec.mentions_per_word = j.value("mentions_per_word", 100);
    spec.sentence_length = j.value("sentence_length", 10);
    spec.seed = j.value("seed", 1ULL);
    ClassInventory inv(spec.class_names);
    for (const auto& jw : j.at("words")) {
      SynthWord w;
      w.surface = jw.at("surface").get<std::string>();
      for (const auto& c : jw.at("classes")) {
        w.classes.push_back(inv.require(c.get<std::string>()));
      }
      if (jw.contains("probs")) {
        for (const auto& p : jw.at("probs")) w.probs.push_back(p.get<double>());
      } else {
        w.probs.assign(w.classes.size(), 1.0 / static_cast<double>(w.classes.size()));
      }
      spec.words.push_back(std::move(w));
    }
    spec.validate();
    return spec;
  }

  static SynthSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synth spec: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

struct SynthResult {
  std::vector<AnnotatedSentence> sentences;
  SenseLexicon gold;  // realized counts, keyed like the built lexicon
  ClassInventory inventory;
};

// Deterministic for a given spec + seed. The gold lexicon records the
// realized class counts exactly, keyed by the lowercased "@"-token of
// each surface form.
inline SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  SynthResult result;
  result.inventory = spec.inventory();

  const int n_classes = static_cast<int>(spec.class_names.size());
  char buf[64];
  std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < spec.context_vocab_per_class; ++i) {
      std::snprintf(buf, sizeof(buf), "ctx%02d_%04d", c, i);
      pools[static_cast<std::size_t>(c)].push_back(buf);
    }
  }
  std::vector<std::string> shared_pool;
  if (spec.context_overlap > 0.0) {
    for (int i = 0; i < spec.context_vocab_per_class; ++i) {
      std::snprintf(buf, sizeof(buf), "ctxshared_%04d", i);
      shared_pool.push_back(buf);
    }
  }

  Rng rng(spec.seed);
  for (const auto& w : spec.words) {
    for (int m = 0; m < spec.mentions_per_word; ++m) {
      // Sample the mention's class from the word's sense distribution.
      double u = rng.uniform01();
      std::size_t pick = 0;
      double cum = 0.0;
      for (std::size_t i = 0; i < w.probs.size(); ++i) {
        cum += w.probs[i];
        if (u < cum) {
          pick = i;
          break;
        }
        pick = i;
      }
      int cls = w.classes[pick];
      const auto& pool = pools[static_cast<std::size_t>(cls)];

      AnnotatedSentence s;
      std::size_t pos = rng.bounded(static_cast<std::uint64_t>(spec.sentence_length));
      for (int t = 0; t < spec.sentence_length; ++t) {
        if (static_cast<std::size_t>(t) == pos) {
          s.tokens.push_back(w.surface);
        } else if (!shared_pool.empty() && rng.bernoulli(spec.context_overlap)) {
          s.tokens.push_back(shared_pool[rng.bounded(shared_pool.size())]);
        } else {
          s.tokens.push_back(pool[rng.bounded(pool.size())]);
        }
      }
      Mention mention;
      mention.begin = pos;
      mention.end = pos + 1;
      mention.entity = "E_" + w.surface + "_" + spec.class_names[static_cast<std::size_t>(cls)];
      mention.classes = {cls};
      s.mentions.push_back(std::move(mention));
      result.sentences.push_back(std::move(s));

      result.gold.add(mention_token(result.sentences.back(),
                                    result.sentences.back().mentions.front(), true),
                      cls);
    }
  }
  shuffle(result.sentences, rng);
  return result;
}

}  // namespace senseprobe
