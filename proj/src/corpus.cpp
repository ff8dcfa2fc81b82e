#include "kaid/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {
namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c) != 0;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += extra + 1;
  }
  return true;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain" || name == "plain-lines" || name == "txt") return CorpusFormat::kPlainLines;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw ValidationError("unknown corpus format '" + std::string(name) + "' (expected plain-lines or jsonl)");
}

std::vector<std::string> tokenize(std::string_view raw) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else if (c < 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

bool is_punctuation_token(std::string_view token) {
  return token.size() == 1 && is_ascii_punct(static_cast<unsigned char>(token[0]));
}

Sentence make_sentence(std::int64_t id, std::string raw) {
  Sentence s;
  s.id = id;
  s.tokens = tokenize(raw);
  if (s.tokens.size() > kMaxSentenceTokens) {
    std::cerr << "warning: sentence " << id << " has " << s.tokens.size() << " tokens, truncated to "
              << kMaxSentenceTokens << "\n";
    s.tokens.resize(kMaxSentenceTokens);
  }
  s.raw = std::move(raw);
  return s;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw ValidationError("corpus file not found: " + path.string());
  Corpus corpus;
  corpus.source_path = path.string();
  const auto lines = io::read_lines(path);
  for (std::size_t lineno = 0; lineno < lines.size(); ++lineno) {
    const auto& line = lines[lineno];
    const auto where = path.string() + ":" + std::to_string(lineno + 1);
    if (!valid_utf8(line)) throw ValidationError(where + ": invalid UTF-8");
    if (format == CorpusFormat::kPlainLines) {
      corpus.sentences.push_back(make_sentence(static_cast<std::int64_t>(corpus.sentences.size()), line));
      continue;
    }
    if (std::all_of(line.begin(), line.end(), [](char c) { return is_ascii_space(static_cast<unsigned char>(c)); })) {
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON record: " + e.what());
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
      throw ValidationError(where + ": record is missing string field \"text\"");
    }
    corpus.sentences.push_back(
        make_sentence(static_cast<std::int64_t>(corpus.sentences.size()), record["text"].get<std::string>()));
  }
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["text"] = s.raw;
    j["tokens"] = s.tokens;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file(path, corpus_to_jsonl(corpus));
}

Corpus sample_subset(const Corpus& corpus, std::size_t count, std::uint64_t seed) {
  KAID_REQUIRE(count > 0, "sample count must be positive");
  KAID_REQUIRE(count <= corpus.size(), "sample count " + std::to_string(count) + " exceeds corpus size " +
                                           std::to_string(corpus.size()));
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  Corpus out;
  out.source_path = corpus.source_path;
  out.sentences.reserve(count);
  for (auto i : idx) out.sentences.push_back(corpus.sentences[i]);
  return out;
}

}  // namespace kaid
