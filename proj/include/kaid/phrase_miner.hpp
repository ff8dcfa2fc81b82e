#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kaid/corpus.hpp"

namespace kaid {

inline constexpr std::size_t kMaxPhraseLen = 5;

// Key for an n-gram: its tokens joined by a single space.
std::string phrase_key(std::span<const std::string> tokens);
std::vector<std::string> phrase_tokens(std::string_view key);

struct PhraseCandidate {
  std::vector<std::string> tokens;
  std::uint64_t frequency = 0;
  double quality = 0.0;

  std::string text() const { return phrase_key(tokens); }
};

// Exact n-gram counts for 1 <= n <= max_len, never spanning punctuation.
struct CandidateTable {
  std::size_t max_len = 0;
  std::uint64_t total_tokens = 0;  // non-punctuation tokens
  std::unordered_map<std::string, std::uint64_t> counts;

  std::uint64_t frequency(const std::string& key) const {
    auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }
};

CandidateTable count_ngrams(std::span<const Sentence> sentences, std::size_t max_len);
// Shard tables combine by summation only, so merge order cannot matter.
void merge_tables(CandidateTable& into, const CandidateTable& shard);
CandidateTable generate_candidates(const Corpus& corpus, std::size_t max_len, std::size_t shards = 1);

struct QualityFeatures {
  double pmi = 0.0;           // min over adjacent splits; multiword only
  double completeness = 1.0;  // 1 - (most frequent one-token extension) / frequency
  double log_frequency = 0.0;
};

// Fixed-weight logistic quality model. Features are min-max normalized over
// the scored candidate set (a degenerate range normalizes to 1.0); unigrams
// use normalized log-frequency alone.
class QualityModel {
 public:
  QualityModel(const CandidateTable& table, std::span<const std::string> candidate_keys);

  double score(const std::string& key) const;
  const QualityFeatures& normalized(const std::string& key) const;

 private:
  std::unordered_map<std::string, QualityFeatures> normalized_;
};

double score_quality(const PhraseCandidate& candidate, const QualityModel& stats);

struct MinerConfig {
  std::uint64_t min_frequency = 3;
  double min_quality = 0.5;
  std::size_t max_len = 4;
  // Drop candidates that begin or end with a stopword.
  bool trim_stopword_edges = true;

  std::vector<std::string> errors() const;
  void validate() const;
};

struct PhraseLexicon {
  std::vector<PhraseCandidate> phrases;  // quality desc, then phrase asc
  MinerConfig config;

  bool empty() const { return phrases.empty(); }
  std::size_t size() const { return phrases.size(); }
};

bool is_stopword(std::string_view token);
const std::vector<std::string>& stopword_list();

PhraseLexicon mine_phrases(const Corpus& corpus, const MinerConfig& config);
PhraseLexicon mine_phrases(const CandidateTable& table, const MinerConfig& config);

// TSV: header "phrase\tfrequency\tquality", quality printed with 6 decimals.
std::string lexicon_to_tsv(const PhraseLexicon& lexicon);
PhraseLexicon lexicon_from_tsv(const std::filesystem::path& path);

}  // namespace kaid
