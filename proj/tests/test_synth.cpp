#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "senseprobe/lexicon.hpp"
#include "senseprobe/synth.hpp"

using namespace senseprobe;

TEST_CASE("realized sense counts stay within binomial bounds and match gold") {
  SynthSpec spec;
  spec.class_names = {"A", "B"};
  spec.context_vocab_per_class = 20;
  spec.words = {{"w", {0, 1}, {0.9, 0.1}}};
  spec.mentions_per_word = 1000;
  spec.sentence_length = 6;
  spec.seed = 5;
  auto result = generate(spec);
  REQUIRE(result.sentences.size() == 1000);

  std::uint64_t a = result.gold.count("@w@", 0);
  std::uint64_t b = result.gold.count("@w@", 1);
  CHECK(a + b == 1000);
  double sigma = std::sqrt(1000 * 0.9 * 0.1);
  CHECK(std::abs(static_cast<double>(a) - 900.0) <= 3 * sigma);

  // Gold counts equal a recount over the emitted sentences, exactly.
  auto rebuilt = build_sense_lexicon(result.sentences, 1);
  CHECK(rebuilt.count("@w@", 0) == a);
  CHECK(rebuilt.count("@w@", 1) == b);
}

TEST_CASE("single-class spec yields dominance 1 everywhere") {
  auto spec = SynthSpec::basic(3, 4, 0, {}, 20, 5, 9);
  auto result = generate(spec);
  for (const auto& [word, counts] : result.gold) {
    REQUIRE(counts.size() == 1);
    CHECK(result.gold.dominance(word, counts.begin()->first) == 1.0);
  }
  for (const auto& s : result.sentences) {
    REQUIRE(s.mentions.size() == 1);
    CHECK(s.mentions[0].classes.size() == 1);
  }
}

TEST_CASE("generation is deterministic per seed") {
  auto spec = SynthSpec::basic(3, 3, 4, {0.7, 0.3}, 15, 6, 77);
  auto a = generate(spec);
  auto b = generate(spec);
  auto pa = (std::filesystem::temp_directory_path() / "synth_a.jsonl").string();
  auto pb = (std::filesystem::temp_directory_path() / "synth_b.jsonl").string();
  write_corpus_jsonl(a.sentences, a.inventory, pa);
  write_corpus_jsonl(b.sentences, b.inventory, pb);
  std::ifstream fa(pa), fb(pb);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  REQUIRE(!sa.empty());
  CHECK(sa == sb);

  spec.seed = 78;
  auto c = generate(spec);
  auto pc = (std::filesystem::temp_directory_path() / "synth_c.jsonl").string();
  write_corpus_jsonl(c.sentences, c.inventory, pc);
  std::ifstream fc(pc);
  std::string sc((std::istreambuf_iterator<char>(fc)), std::istreambuf_iterator<char>());
  CHECK(sa != sc);
}

TEST_CASE("gold lexicon equals build_sense_lexicon on the stream") {
  auto spec = SynthSpec::basic(4, 5, 6, {0.6, 0.4}, 30, 7, 13);
  auto result = generate(spec);
  auto rebuilt = build_sense_lexicon(result.sentences, 1);
  REQUIRE(rebuilt.size() == result.gold.size());
  for (const auto& [word, counts] : result.gold) {
    for (const auto& [cls, n] : counts) {
      CHECK(rebuilt.count(word, cls) == n);
    }
  }
}

TEST_CASE("class-conditional contexts are recoverable from disjoint pools") {
  auto spec = SynthSpec::basic(4, 6, 0, {}, 60, 8, 33);
  auto result = generate(spec);

  // Naive bag-of-words classifier: per-class token counts from the first
  // half of the mentions, add-one scoring on the held-out half.
  std::map<std::string, std::map<int, int>> token_class;
  std::map<int, int> class_total;
  std::size_t half = result.sentences.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const auto& s = result.sentences[i];
    int cls = s.mentions[0].classes[0];
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      if (t >= s.mentions[0].begin && t < s.mentions[0].end) continue;
      token_class[s.tokens[t]][cls] += 1;
      class_total[cls] += 1;
    }
  }
  int n_classes = static_cast<int>(spec.class_names.size());
  std::size_t correct = 0, total = 0;
  for (std::size_t i = half; i < result.sentences.size(); ++i) {
    const auto& s = result.sentences[i];
    std::vector<double> score(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      if (t >= s.mentions[0].begin && t < s.mentions[0].end) continue;
      for (int c = 0; c < n_classes; ++c) {
        int cnt = token_class.count(s.tokens[t]) ? token_class[s.tokens[t]][c] : 0;
        score[static_cast<std::size_t>(c)] +=
            std::log((cnt + 1.0) / (class_total[c] + 1.0));
      }
    }
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (score[static_cast<std::size_t>(c)] > score[static_cast<std::size_t>(best)]) best = c;
    }
    if (best == s.mentions[0].classes[0]) ++correct;
    ++total;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.95);
}

TEST_CASE("full context overlap destroys recoverability signal structure") {
  auto spec = SynthSpec::basic(2, 4, 0, {}, 30, 6, 41);
  spec.context_overlap = 1.0;
  auto result = generate(spec);
  // Every context token comes from the shared pool.
  for (const auto& s : result.sentences) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      if (t == s.mentions[0].begin) continue;
      CHECK(s.tokens[t].rfind("ctxshared_", 0) == 0);
    }
  }
}

TEST_CASE("invalid specs are rejected before generation") {
  SynthSpec spec;
  spec.class_names = {"A"};
  spec.words = {{"w", {0}, {0.5}}};  // probs do not sum to 1
  spec.mentions_per_word = 5;
  spec.sentence_length = 4;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);

  spec.words = {{"w", {3}, {1.0}}};  // class index out of range
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);

  spec.words.clear();
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("spec json round-trip") {
  auto spec = SynthSpec::basic(3, 2, 2, {0.8, 0.2}, 10, 5, 21);
  spec.context_overlap = 0.25;
  auto j = spec.to_json();
  auto back = SynthSpec::from_json(j);
  CHECK(back.class_names == spec.class_names);
  CHECK(back.mentions_per_word == spec.mentions_per_word);
  CHECK(back.sentence_length == spec.sentence_length);
  CHECK(back.seed == spec.seed);
  CHECK(back.context_overlap == spec.context_overlap);
  REQUIRE(back.words.size() == spec.words.size());
  for (std::size_t i = 0; i < spec.words.size(); ++i) {
    CHECK(back.words[i].surface == spec.words[i].surface);
    CHECK(back.words[i].classes == spec.words[i].classes);
    CHECK(back.words[i].probs == spec.words[i].probs);
  }
}
