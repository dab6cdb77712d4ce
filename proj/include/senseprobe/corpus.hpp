#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "senseprobe/common.hpp"
#include "senseprobe/inventory.hpp"

namespace senseprobe {

// Entity-linked span [begin, end) over the sentence tokens, carrying the
// set of S-classes of the linked entity. Classes are kept sorted by id.
struct Mention {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string entity;
  std::vector<ClassId> classes;
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;
};

enum class CorpusFormat { Jsonl, Tsv };

enum class StreamMode { Word, Sense };

// A derived token corpus: sentences of plain tokens, mention spans
// already replaced. Sentence boundaries are preserved because windows in
// the trainer must not cross them.
struct TokenStream {
  StreamMode mode = StreamMode::Word;
  std::vector<std::vector<std::string>> sentences;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write token stream: " + path);
    for (const auto& s : sentences) out << join(s.begin(), s.end(), " ") << "\n";
  }

  static TokenStream load(const std::string& path,
                          StreamMode mode = StreamMode::Word) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open token stream: " + path);
    TokenStream ts;
    ts.mode = mode;
    std::string line;
    while (std::getline(in, line)) {
      auto toks = split_ws(line);
      if (!toks.empty()) ts.sentences.push_back(std::move(toks));
    }
    return ts;
  }
};

namespace detail {

// Mention classes are canonically sorted by inventory id; parsing
// guarantees it, hand-built sentences may not.
inline std::vector<ClassId> sorted_classes(const Mention& m) {
  std::vector<ClassId> ids = m.classes;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline void check_sentence(const AnnotatedSentence& s, std::size_t line) {
  for (const auto& t : s.tokens) {
    if (t.empty()) throw ParseError("empty token", line);
    if (t.find_first_of(" \t\n\r") != std::string::npos) {
      throw ParseError("token contains whitespace: '" + t + "'", line);
    }
  }
  for (const auto& m : s.mentions) {
    if (m.begin >= m.end || m.end > s.tokens.size()) {
      throw ParseError("span out of bounds: [" + std::to_string(m.begin) +
                           "," + std::to_string(m.end) + ") on " +
                           std::to_string(s.tokens.size()) + " tokens",
                       line);
    }
    if (m.classes.empty()) throw ParseError("mention without classes", line);
  }
  // Spans within a sentence must not overlap.
  std::vector<const Mention*> sorted;
  sorted.reserve(s.mentions.size());
  for (const auto& m : s.mentions) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(),
            [](const Mention* a, const Mention* b) { return a->begin < b->begin; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->end > sorted[i]->begin) {
      throw ParseError("overlapping mention spans", line);
    }
  }
}

inline std::vector<ClassId> resolve_classes(const std::vector<std::string>& names,
                                            const ClassInventory& inv,
                                            std::size_t line) {
  std::vector<ClassId> ids;
  ids.reserve(names.size());
  for (const auto& n : names) {
    auto id = inv.id_of(n);
    if (!id) throw ParseError("unknown S-class name: " + n, line);
    ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace detail

// Streaming reader over an annotated corpus file. Yields sentences in
// file order; all structural errors carry the offending line number.
class CorpusReader {
 public:
  CorpusReader(const std::string& path, CorpusFormat format,
               const ClassInventory& inventory)
      : in_(path), format_(format), inventory_(&inventory), path_(path) {
    if (!in_) throw std::runtime_error("cannot open corpus: " + path);
  }

  std::optional<AnnotatedSentence> next() {
    return format_ == CorpusFormat::Jsonl ? next_jsonl() : next_tsv();
  }

  const std::string& path() const { return path_; }

 private:
  std::optional<AnnotatedSentence> next_jsonl() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed record: ") + e.what(), line_no_);
      }
      AnnotatedSentence s;
      if (!rec.is_object() || !rec.contains("tokens") || !rec["tokens"].is_array()) {
        throw ParseError("malformed record: missing 'tokens' array", line_no_);
      }
      for (const auto& t : rec["tokens"]) {
        if (!t.is_string()) throw ParseError("non-string token", line_no_);
        s.tokens.push_back(t.get<std::string>());
      }
      for (const auto& jm : rec.value("mentions", nlohmann::json::array())) {
        Mention m;
        if (!jm.contains("span") || !jm["span"].is_array() || jm["span"].size() != 2) {
          throw ParseError("malformed mention span", line_no_);
        }
        long long b = jm["span"][0].get<long long>();
        long long e = jm["span"][1].get<long long>();
        if (b < 0 || e < 0) throw ParseError("negative span index", line_no_);
        m.begin = static_cast<std::size_t>(b);
        m.end = static_cast<std::size_t>(e);
        m.entity = jm.value("entity", std::string());
        std::vector<std::string> names;
        for (const auto& c : jm.value("classes", nlohmann::json::array())) {
          names.push_back(c.get<std::string>());
        }
        m.classes = detail::resolve_classes(names, *inventory_, line_no_);
        if (m.classes.empty()) throw ParseError("mention without classes", line_no_);
        s.mentions.push_back(std::move(m));
      }
      detail::check_sentence(s, line_no_);
      return s;
    }
    return std::nullopt;
  }

  // token<TAB>tag per line, blank line between sentences. Tags are O,
  // B-<classes> or I-<classes> with comma-separated class names.
  std::optional<AnnotatedSentence> next_tsv() {
    AnnotatedSentence s;
    std::string line;
    bool saw_row = false;
    std::size_t first_line = line_no_ + 1;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) {
        if (saw_row) break;
        continue;
      }
      saw_row = true;
      auto cols = split(line, '\t');
      if (cols.size() != 2) {
        throw ParseError("expected token<TAB>tag", line_no_);
      }
      const std::string& tok = cols[0];
      const std::string& tag = cols[1];
      std::size_t pos = s.tokens.size();
      s.tokens.push_back(tok);
      if (tag == "O") {
        open_ = false;
      } else if (tag.rfind("B-", 0) == 0 || tag.rfind("I-", 0) == 0) {
        auto names = split(tag.substr(2), ',');
        auto ids = detail::resolve_classes(names, *inventory_, line_no_);
        if (tag[0] == 'B' || !open_ || s.mentions.empty()) {
          Mention m;
          m.begin = pos;
          m.end = pos + 1;
          m.classes = std::move(ids);
          s.mentions.push_back(std::move(m));
          open_ = true;
        } else {
          Mention& m = s.mentions.back();
          if (m.classes != ids) {
            throw ParseError("inconsistent classes inside BIO span", line_no_);
          }
          m.end = pos + 1;
        }
      } else {
        throw ParseError("malformed tag: '" + tag + "'", line_no_);
      }
    }
    open_ = false;
    if (!saw_row) return std::nullopt;
    detail::check_sentence(s, first_line);
    return s;
  }

  std::ifstream in_;
  CorpusFormat format_;
  const ClassInventory* inventory_;
  std::string path_;
  std::size_t line_no_ = 0;
  bool open_ = false;
};

inline std::vector<AnnotatedSentence> load_corpus(const std::string& path,
                                                  CorpusFormat format,
                                                  const ClassInventory& inv) {
  CorpusReader reader(path, format, inv);
  std::vector<AnnotatedSentence> out;
  while (auto s = reader.next()) out.push_back(std::move(*s));
  return out;
}

// Canonical JSONL serialization: fixed key order, no whitespace, classes
// sorted by inventory id. Parsing a canonical file and re-serializing it
// reproduces the bytes exactly.
inline std::string to_canonical_jsonl(const AnnotatedSentence& s,
                                      const ClassInventory& inv) {
  nlohmann::ordered_json rec;
  rec["tokens"] = s.tokens;
  auto& ms = rec["mentions"] = nlohmann::ordered_json::array();
  for (const auto& m : s.mentions) {
    nlohmann::ordered_json jm;
    jm["span"] = {m.begin, m.end};
    jm["entity"] = m.entity;
    auto& cs = jm["classes"] = nlohmann::ordered_json::array();
    for (ClassId c : detail::sorted_classes(m)) cs.push_back(inv.name(c));
    ms.push_back(std::move(jm));
  }
  return rec.dump();
}

inline void write_corpus_jsonl(const std::vector<AnnotatedSentence>& sentences,
                               const ClassInventory& inv,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus: " + path);
  for (const auto& s : sentences) out << to_canonical_jsonl(s, inv) << "\n";
}

inline void write_corpus_tsv(const std::vector<AnnotatedSentence>& sentences,
                             const ClassInventory& inv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus: " + path);
  for (const auto& s : sentences) {
    std::vector<std::string> tags(s.tokens.size(), "O");
    for (const auto& m : s.mentions) {
      std::vector<std::string> names;
      for (ClassId c : detail::sorted_classes(m)) names.push_back(inv.name(c));
      std::string cls = join(names.begin(), names.end(), ",");
      for (std::size_t i = m.begin; i < m.end; ++i) {
        tags[i] = (i == m.begin ? "B-" : "I-") + cls;
      }
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << "\t" << tags[i] << "\n";
    }
    out << "\n";
  }
}

// Surface form of a mention: span tokens joined by "_", so linked
// multiwords become single tokens.
inline std::string mention_surface(const AnnotatedSentence& s, const Mention& m) {
  return join(s.tokens.begin() + static_cast<std::ptrdiff_t>(m.begin),
              s.tokens.begin() + static_cast<std::ptrdiff_t>(m.end), "_");
}

inline std::string wrap_mention(const std::string& surface) {
  return "@" + surface + "@";
}

// Key under which a mention is counted in the lexicon and appears in the
// word corpus. Lowercasing happens after wrapping.
inline std::string mention_token(const AnnotatedSentence& s, const Mention& m,
                                 bool lowercase) {
  std::string t = wrap_mention(mention_surface(s, m));
  return lowercase ? to_lower(t) : t;
}

namespace detail {

template <typename PerMention>
std::vector<std::string> emit_tokens(const AnnotatedSentence& s, bool lowercase,
                                     PerMention&& per_mention) {
  std::vector<std::string> out;
  out.reserve(s.tokens.size());
  std::vector<const Mention*> at(s.tokens.size(), nullptr);
  for (const auto& m : s.mentions) at[m.begin] = &m;
  std::size_t i = 0;
  while (i < s.tokens.size()) {
    if (at[i] != nullptr) {
      const Mention& m = *at[i];
      per_mention(m, out);
      i = m.end;
    } else {
      out.push_back(lowercase ? to_lower(s.tokens[i]) : s.tokens[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace detail

// WORD mode: every mention span becomes one "@"-wrapped token.
inline std::vector<std::string> emit_word_tokens(const AnnotatedSentence& s,
                                                 bool lowercase) {
  return detail::emit_tokens(s, lowercase,
                             [&](const Mention& m, std::vector<std::string>& out) {
                               out.push_back(mention_token(s, m, lowercase));
                             });
}

// SENSE mode: one "@word@-class" token per carried class, in inventory
// order at the mention position.
inline std::vector<std::string> emit_sense_tokens(const AnnotatedSentence& s,
                                                  const ClassInventory& inv,
                                                  bool lowercase) {
  return detail::emit_tokens(
      s, lowercase, [&](const Mention& m, std::vector<std::string>& out) {
        std::string base = mention_token(s, m, lowercase);
        for (ClassId c : detail::sorted_classes(m)) {
          out.push_back(base + "-" + inv.name(c));
        }
      });
}

// Emits the derived corpus for a whole sentence stream. Sentences with
// fewer than min_annotated mentions are dropped (0 disables filtering).
inline TokenStream emit_token_stream(const std::vector<AnnotatedSentence>& sentences,
                                     StreamMode mode, const ClassInventory& inv,
                                     bool lowercase, std::size_t min_annotated = 1) {
  TokenStream ts;
  ts.mode = mode;
  for (const auto& s : sentences) {
    if (s.mentions.size() < min_annotated) continue;
    ts.sentences.push_back(mode == StreamMode::Word
                               ? emit_word_tokens(s, lowercase)
                               : emit_sense_tokens(s, inv, lowercase));
  }
  return ts;
}

}  // namespace senseprobe
