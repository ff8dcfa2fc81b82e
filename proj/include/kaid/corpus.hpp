#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kaid {

inline constexpr std::size_t kMaxSentenceTokens = 256;

struct Sentence {
  std::int64_t id = 0;
  std::string raw;
  std::vector<std::string> tokens;
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::string source_path;

  std::size_t size() const { return sentences.size(); }
};

enum class CorpusFormat { kPlainLines, kJsonl };

CorpusFormat parse_corpus_format(std::string_view name);

// Lowercases ASCII, splits on whitespace and detaches every ASCII punctuation
// character as a token of its own. Non-ASCII bytes are kept inside tokens.
std::vector<std::string> tokenize(std::string_view raw);

bool is_punctuation_token(std::string_view token);

// Builds a sentence, truncating to kMaxSentenceTokens with a warning on stderr.
Sentence make_sentence(std::int64_t id, std::string raw);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

// JSONL records {id, text, tokens}, one per sentence.
std::string corpus_to_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Uniform sample without replacement; keeps the original ids and order.
Corpus sample_subset(const Corpus& corpus, std::size_t count, std::uint64_t seed);

}  // namespace kaid
