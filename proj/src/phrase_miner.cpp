#include "kaid/phrase_miner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {
namespace {

// English function words. Phrases made only of these are never entities.
const std::vector<std::string> kStopwords = {
    "a",       "about",  "above",   "after",  "again",   "against", "all",    "am",      "an",
    "and",     "any",    "are",     "as",     "at",      "be",      "because", "been",   "before",
    "being",   "below",  "between", "both",   "but",     "by",      "can",    "could",   "did",
    "do",      "does",   "doing",   "don",    "down",    "during",  "each",   "few",     "for",
    "from",    "further", "get",    "got",    "had",     "has",     "have",   "having",  "he",
    "her",     "here",   "hers",    "herself", "him",    "himself", "his",    "how",     "i",
    "if",      "in",     "into",    "is",     "it",      "its",     "itself", "just",    "let",
    "me",      "more",   "most",    "my",     "myself",  "no",      "nor",    "not",     "now",
    "of",      "off",    "on",      "once",   "only",    "or",      "other",  "our",     "ours",
    "ourselves", "out",  "over",    "own",    "please",  "s",       "same",   "she",     "should",
    "so",      "some",   "still",   "such",   "t",       "than",    "that",   "the",     "their",
    "theirs",  "them",   "themselves", "then", "there",  "these",   "they",   "this",    "those",
    "through", "to",     "too",     "under",  "until",   "up",      "very",   "want",    "was",
    "we",      "were",   "what",    "when",   "where",   "which",   "while",  "who",     "whom",
    "why",     "will",   "with",    "would",  "yet",     "you",     "your",   "yours",   "yourself",
    "yourselves"};

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> set(kStopwords.begin(), kStopwords.end());
  return set;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t token_count(const std::string& key) {
  return static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double normalize(double v) const {
    if (!(hi > lo)) return 1.0;
    return (v - lo) / (hi - lo);
  }
};

}  // namespace

std::string phrase_key(std::span<const std::string> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key += ' ';
    key += tokens[i];
  }
  return key;
}

std::vector<std::string> phrase_tokens(std::string_view key) { return io::split(key, ' '); }

CandidateTable count_ngrams(std::span<const Sentence> sentences, std::size_t max_len) {
  KAID_REQUIRE(max_len >= 1 && max_len <= kMaxPhraseLen, "max_len must be in [1, 5]");
  CandidateTable table;
  table.max_len = max_len;
  for (const auto& s : sentences) {
    const auto& tok = s.tokens;
    std::size_t seg_start = 0;
    // Walk punctuation-free segments; n-grams never cross a punctuation token.
    for (std::size_t i = 0; i <= tok.size(); ++i) {
      if (i < tok.size() && !is_punctuation_token(tok[i])) continue;
      for (std::size_t start = seg_start; start < i; ++start) {
        ++table.total_tokens;
        std::string key;
        for (std::size_t n = 1; n <= max_len && start + n <= i; ++n) {
          if (n > 1) key += ' ';
          key += tok[start + n - 1];
          ++table.counts[key];
        }
      }
      seg_start = i + 1;
    }
  }
  return table;
}

void merge_tables(CandidateTable& into, const CandidateTable& shard) {
  KAID_REQUIRE(into.max_len == shard.max_len || into.counts.empty(), "cannot merge tables with different max_len");
  into.max_len = shard.max_len;
  into.total_tokens += shard.total_tokens;
  for (const auto& [key, n] : shard.counts) into.counts[key] += n;
}

CandidateTable generate_candidates(const Corpus& corpus, std::size_t max_len, std::size_t shards) {
  KAID_REQUIRE(max_len >= 1 && max_len <= kMaxPhraseLen, "max_len must be in [1, 5]");
  shards = std::max<std::size_t>(1, shards);
  CandidateTable table;
  table.max_len = max_len;
  const std::span<const Sentence> all(corpus.sentences);
  const std::size_t per = (all.size() + shards - 1) / shards;
  for (std::size_t begin = 0; begin < all.size(); begin += per) {
    merge_tables(table, count_ngrams(all.subspan(begin, std::min(per, all.size() - begin)), max_len));
  }
  return table;
}

QualityModel::QualityModel(const CandidateTable& table, std::span<const std::string> candidate_keys) {
  // Extension maxima for every key, computed in one pass instead of per key.
  std::unordered_map<std::string, std::uint64_t> max_ext;
  for (const auto& [key, count] : table.counts) {
    auto first_space = key.find(' ');
    if (first_space == std::string::npos) continue;
    auto last_space = key.rfind(' ');
    auto& p = max_ext[key.substr(0, last_space)];
    p = std::max(p, count);
    auto& s = max_ext[key.substr(first_space + 1)];
    s = std::max(s, count);
  }
  const double log_total = std::log(static_cast<double>(std::max<std::uint64_t>(1, table.total_tokens)));

  std::unordered_map<std::string, QualityFeatures> raw;
  raw.reserve(candidate_keys.size());
  Range pmi_range, comp_range, freq_range;
  for (const auto& key : candidate_keys) {
    const double freq = static_cast<double>(table.frequency(key));
    KAID_REQUIRE(freq > 0, "candidate '" + key + "' does not occur in the table");
    QualityFeatures f;
    f.log_frequency = std::log(freq);
    const auto tokens = phrase_tokens(key);
    const std::size_t n = tokens.size();
    if (n >= 2) {
      double best = std::numeric_limits<double>::infinity();
      const std::span<const std::string> all(tokens);
      for (std::size_t split = 1; split < n; ++split) {
        const double left = static_cast<double>(table.frequency(phrase_key(all.first(split))));
        const double right = static_cast<double>(table.frequency(phrase_key(all.subspan(split))));
        best = std::min(best, f.log_frequency + log_total - std::log(left) - std::log(right));
      }
      f.pmi = best;
    }
    if (n < table.max_len) {
      auto it = max_ext.find(key);
      const double ext = it == max_ext.end() ? 0.0 : static_cast<double>(it->second);
      f.completeness = 1.0 - ext / freq;
    }
    freq_range.add(f.log_frequency);
    if (n >= 2) {
      pmi_range.add(f.pmi);
      comp_range.add(f.completeness);
    }
    raw.emplace(key, f);
  }
  normalized_.reserve(raw.size());
  for (const auto& [key, f] : raw) {
    QualityFeatures norm;
    norm.log_frequency = freq_range.normalize(f.log_frequency);
    if (token_count(key) >= 2) {
      norm.pmi = pmi_range.normalize(f.pmi);
      norm.completeness = comp_range.normalize(f.completeness);
    } else {
      norm.pmi = 0.0;
      norm.completeness = 0.0;
    }
    normalized_.emplace(key, norm);
  }
}

const QualityFeatures& QualityModel::normalized(const std::string& key) const {
  auto it = normalized_.find(key);
  if (it == normalized_.end()) throw ValidationError("candidate '" + key + "' was not scored");
  return it->second;
}

double QualityModel::score(const std::string& key) const {
  const auto& f = normalized(key);
  if (token_count(key) == 1) return logistic(f.log_frequency);
  return logistic(f.pmi + f.completeness + f.log_frequency);
}

double score_quality(const PhraseCandidate& candidate, const QualityModel& stats) {
  return stats.score(candidate.text());
}

std::vector<std::string> MinerConfig::errors() const {
  std::vector<std::string> errs;
  if (min_frequency < 1) errs.push_back("mine.min_frequency must be >= 1");
  if (!(min_quality >= 0.0 && min_quality <= 1.0)) errs.push_back("mine.min_quality must be in [0, 1]");
  if (max_len < 1 || max_len > kMaxPhraseLen) errs.push_back("mine.max_len must be in [1, 5]");
  return errs;
}

void MinerConfig::validate() const {
  auto errs = errors();
  if (!errs.empty()) throw ValidationError(io::join(errs, "; "));
}

bool is_stopword(std::string_view token) { return stopword_set().count(std::string(token)) > 0; }

const std::vector<std::string>& stopword_list() { return kStopwords; }

PhraseLexicon mine_phrases(const Corpus& corpus, const MinerConfig& config) {
  config.validate();
  return mine_phrases(generate_candidates(corpus, config.max_len), config);
}

PhraseLexicon mine_phrases(const CandidateTable& table, const MinerConfig& config) {
  config.validate();
  PhraseLexicon lexicon;
  lexicon.config = config;
  if (table.counts.empty()) return lexicon;

  // Normalization runs over the full candidate set, independent of f and tau,
  // which keeps the lexicon monotone in both thresholds.
  std::vector<std::string> keys;
  keys.reserve(table.counts.size());
  for (const auto& [key, count] : table.counts) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  const QualityModel model(table, keys);

  for (const auto& key : keys) {
    const auto freq = table.frequency(key);
    if (freq < config.min_frequency) continue;
    auto tokens = phrase_tokens(key);
    if (std::all_of(tokens.begin(), tokens.end(), [](const std::string& t) { return is_stopword(t); })) continue;
    if (config.trim_stopword_edges && (is_stopword(tokens.front()) || is_stopword(tokens.back()))) continue;
    const double q = model.score(key);
    if (q < config.min_quality) continue;
    lexicon.phrases.push_back(PhraseCandidate{std::move(tokens), freq, q});
  }
  std::sort(lexicon.phrases.begin(), lexicon.phrases.end(), [](const PhraseCandidate& a, const PhraseCandidate& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    return a.tokens < b.tokens;
  });
  return lexicon;
}

std::string lexicon_to_tsv(const PhraseLexicon& lexicon) {
  std::string out = "phrase\tfrequency\tquality\n";
  for (const auto& p : lexicon.phrases) {
    out += p.text();
    out += '\t';
    out += std::to_string(p.frequency);
    out += '\t';
    out += io::format_fixed(p.quality, 6);
    out += '\n';
  }
  return out;
}

PhraseLexicon lexicon_from_tsv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  PhraseLexicon lexicon;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i].rfind("phrase\t", 0) == 0) continue;
    if (lines[i].empty()) continue;
    auto cols = io::split(lines[i], '\t');
    const auto where = path.string() + ":" + std::to_string(i + 1);
    if (cols.size() != 3) throw ValidationError(where + ": expected 3 tab-separated columns");
    PhraseCandidate c;
    c.tokens = phrase_tokens(cols[0]);
    try {
      c.frequency = std::stoull(cols[1]);
      c.quality = std::stod(cols[2]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": bad frequency or quality value");
    }
    if (c.tokens.empty() || c.tokens.front().empty()) throw ValidationError(where + ": empty phrase");
    lexicon.phrases.push_back(std::move(c));
  }
  return lexicon;
}

}  // namespace kaid
