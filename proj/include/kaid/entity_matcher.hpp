#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kaid/corpus.hpp"
#include "kaid/phrase_miner.hpp"

namespace kaid {

struct Mention {
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive
  std::string phrase;

  bool operator==(const Mention&) const = default;
};

struct AnnotatedSentence {
  Sentence sentence;
  std::vector<Mention> mentions;  // sorted by start, non-overlapping
  std::optional<std::string> relation;
  std::optional<double> relation_confidence;
  bool flagged = false;  // confidence fell below the annotation floor
};

// Aho-Corasick automaton over token ids. Phrases are matched as whole-token
// sequences; overlapping hits are resolved leftmost-longest.
class Matcher {
 public:
  Matcher() : Matcher(std::vector<std::vector<std::string>>{}) {}
  explicit Matcher(const std::vector<std::vector<std::string>>& phrases);

  std::vector<Mention> find_mentions(std::span<const std::string> tokens) const;
  std::vector<Mention> find_mentions(const Sentence& sentence) const { return find_mentions(sentence.tokens); }

  std::size_t pattern_count() const { return patterns_.size(); }
  std::size_t node_count() const { return nodes_.size(); }

  // Canonical text dump of the automaton; identical lexicons give identical bytes.
  std::string serialize() const;

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> next;  // (token id, node), sorted
    std::uint32_t fail = 0;
    std::uint32_t output = kNone;  // nearest terminal node on the fail chain, self included
    std::uint32_t pattern = kNone;
    std::uint32_t depth = 0;
  };

  std::uint32_t child(std::uint32_t node, std::uint32_t token) const;

  std::unordered_map<std::string, std::uint32_t> token_ids_;
  std::vector<std::string> tokens_;
  std::vector<std::string> patterns_;
  std::vector<Node> nodes_;
};

Matcher build_matcher(const PhraseLexicon& lexicon);

}  // namespace kaid
