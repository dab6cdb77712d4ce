#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "senseprobe/embedding.hpp"

using namespace senseprobe;

namespace {

TokenStream stream_of(std::vector<std::vector<std::string>> sentences) {
  TokenStream ts;
  ts.sentences = std::move(sentences);
  return ts;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("vocab applies min_count") {
  auto vocab = build_vocab(stream_of({{"a", "a", "b"}}), 2);
  REQUIRE(vocab.words == std::vector<std::string>{"a"});
  CHECK(vocab.counts == std::vector<std::uint64_t>{2});
}

TEST_CASE("vocab breaks count ties lexicographically") {
  auto vocab = build_vocab(stream_of({{"b", "a", "a", "b"}}), 1);
  CHECK(vocab.words == std::vector<std::string>{"a", "b"});
}

TEST_CASE("vocab sorts by descending count") {
  auto vocab = build_vocab(stream_of({{"x", "y", "y", "y", "z", "z"}}), 1);
  CHECK(vocab.words == std::vector<std::string>{"y", "z", "x"});
  CHECK(vocab.id_of("y") == 0);
  CHECK_FALSE(vocab.id_of("missing").has_value());
}

TEST_CASE("empty corpus is an error") {
  CHECK_THROWS_WITH(build_vocab(stream_of({}), 1),
                    Catch::Matchers::ContainsSubstring("empty corpus"));
}

TEST_CASE("word2vec text round-trip preserves words, dim and values") {
  Vocabulary vocab;
  vocab.words = {"alpha", "beta", "gamma"};
  vocab.counts = {3, 2, 1};
  vocab.rebuild_index();
  EmbeddingTable table(vocab, 2, EmbeddingMode::Skip);
  float values[3][2] = {{0.25f, -1.5f}, {3.14159274f, 1e-7f}, {-0.0f, 42.0f}};
  for (int i = 0; i < 3; ++i) {
    auto row = table.row(i);
    row[0] = values[i][0];
    row[1] = values[i][1];
  }
  auto path = temp_path("emb_rt.vec");
  table.save_word2vec(path);
  auto loaded = EmbeddingTable::load_word2vec(path);
  REQUIRE(loaded.dim() == 2);
  REQUIRE(loaded.vocab().words == vocab.words);
  CHECK(loaded.mode() == EmbeddingMode::Imported);
  for (int i = 0; i < 3; ++i) {
    auto row = loaded.row(i);
    CHECK(row[0] == values[i][0]);  // %.9g round-trips binary32 exactly
    CHECK(row[1] == values[i][1]);
  }
}

TEST_CASE("header word-count mismatch is an error") {
  auto path = temp_path("emb_badcount.vec");
  {
    std::ofstream out(path);
    out << "5 2\n";
    out << "a 1 2\nb 3 4\nc 5 6\nd 7 8\n";
  }
  CHECK_THROWS_WITH(EmbeddingTable::load_word2vec(path),
                    Catch::Matchers::ContainsSubstring("mismatch"));
}

TEST_CASE("non-numeric field reports the line number") {
  auto path = temp_path("emb_badfield.vec");
  {
    std::ofstream out(path);
    out << "2 2\n";
    out << "a 1 2\n";
    out << "b 3 oops\n";
  }
  try {
    EmbeddingTable::load_word2vec(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("oops") != std::string::npos);
  }
}

TEST_CASE("missing and malformed headers are errors") {
  auto empty = temp_path("emb_empty.vec");
  std::ofstream(empty).flush();
  CHECK_THROWS_AS(EmbeddingTable::load_word2vec(empty), ParseError);

  auto bad = temp_path("emb_badhdr.vec");
  {
    std::ofstream out(bad);
    out << "banana\n";
  }
  CHECK_THROWS_AS(EmbeddingTable::load_word2vec(bad), ParseError);
}

TEST_CASE("probing proceeds on the intersection vocabulary of imports") {
  // An imported file can hold words outside any dataset; lookups simply
  // miss and the caller counts them.
  auto path = temp_path("emb_external.vec");
  {
    std::ofstream out(path);
    out << "3 2\n";
    out << "shared 1 0\n";
    out << "external_only 0 1\n";
    out << "another 0.5 0.5\n";
  }
  auto table = EmbeddingTable::load_word2vec(path);
  CHECK(table.vector_of("shared").has_value());
  CHECK_FALSE(table.vector_of("dataset_only").has_value());
}
