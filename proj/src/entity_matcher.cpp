#include "kaid/entity_matcher.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace kaid {

Matcher::Matcher(const std::vector<std::vector<std::string>>& phrases) {
  std::set<std::vector<std::string>> unique;
  std::set<std::string> vocab;
  for (const auto& p : phrases) {
    if (p.empty()) continue;
    unique.insert(p);
    vocab.insert(p.begin(), p.end());
  }
  tokens_.assign(vocab.begin(), vocab.end());
  for (std::uint32_t i = 0; i < tokens_.size(); ++i) token_ids_.emplace(tokens_[i], i);

  nodes_.emplace_back();
  for (const auto& p : unique) {
    std::uint32_t node = 0;
    for (const auto& tok : p) {
      const auto id = token_ids_.at(tok);
      auto next = child(node, id);
      if (next == kNone) {
        next = static_cast<std::uint32_t>(nodes_.size());
        Node fresh;
        fresh.depth = nodes_[node].depth + 1;
        nodes_.push_back(std::move(fresh));
        auto& edges = nodes_[node].next;
        edges.insert(std::lower_bound(edges.begin(), edges.end(), std::make_pair(id, 0u)), {id, next});
      }
      node = next;
    }
    nodes_[node].pattern = static_cast<std::uint32_t>(patterns_.size());
    patterns_.push_back(phrase_key(p));
  }

  // Breadth-first fail links; edges are visited in token-id order.
  std::deque<std::uint32_t> queue;
  nodes_[0].output = nodes_[0].pattern;
  for (const auto& [tok, c] : nodes_[0].next) {
    nodes_[c].fail = 0;
    nodes_[c].output = nodes_[c].pattern != kNone ? c : kNone;
    queue.push_back(c);
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (const auto& [tok, v] : nodes_[u].next) {
      auto f = nodes_[u].fail;
      while (f != 0 && child(f, tok) == kNone) f = nodes_[f].fail;
      auto target = child(f, tok);
      nodes_[v].fail = (target != kNone && target != v) ? target : 0;
      nodes_[v].output = nodes_[v].pattern != kNone ? v : nodes_[nodes_[v].fail].output;
      queue.push_back(v);
    }
  }
}

std::uint32_t Matcher::child(std::uint32_t node, std::uint32_t token) const {
  const auto& edges = nodes_[node].next;
  auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(token, 0u));
  return (it != edges.end() && it->first == token) ? it->second : kNone;
}

std::vector<Mention> Matcher::find_mentions(std::span<const std::string> tokens) const {
  std::vector<Mention> mentions;
  if (patterns_.empty() || tokens.empty()) return mentions;

  // longest[s] = length of the longest pattern starting at token s.
  std::vector<std::uint32_t> longest(tokens.size(), 0);
  std::vector<std::uint32_t> longest_pattern(tokens.size(), kNone);
  std::uint32_t state = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = token_ids_.find(tokens[i]);
    if (it == token_ids_.end()) {
      state = 0;
      continue;
    }
    const auto tok = it->second;
    while (state != 0 && child(state, tok) == kNone) state = nodes_[state].fail;
    const auto next = child(state, tok);
    state = next == kNone ? 0 : next;
    for (auto out = nodes_[state].output; out != kNone; out = nodes_[nodes_[out].fail].output) {
      const auto len = nodes_[out].depth;
      const auto start = i + 1 - len;
      if (len > longest[start]) {
        longest[start] = len;
        longest_pattern[start] = nodes_[out].pattern;
      }
    }
  }
  for (std::size_t i = 0; i < tokens.size();) {
    if (longest[i] == 0) {
      ++i;
      continue;
    }
    mentions.push_back(Mention{i, i + longest[i], patterns_[longest_pattern[i]]});
    i += longest[i];
  }
  return mentions;
}

std::string Matcher::serialize() const {
  std::string out = "tokens " + std::to_string(tokens_.size()) + "\n";
  for (const auto& t : tokens_) out += t + "\n";
  out += "patterns " + std::to_string(patterns_.size()) + "\n";
  for (const auto& p : patterns_) out += p + "\n";
  out += "nodes " + std::to_string(nodes_.size()) + "\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    out += std::to_string(i) + " d=" + std::to_string(n.depth) + " f=" + std::to_string(n.fail) +
           " p=" + (n.pattern == kNone ? std::string("-") : std::to_string(n.pattern)) + " o=" +
           (n.output == kNone ? std::string("-") : std::to_string(n.output));
    for (const auto& [tok, c] : n.next) out += " " + std::to_string(tok) + ":" + std::to_string(c);
    out += "\n";
  }
  return out;
}

Matcher build_matcher(const PhraseLexicon& lexicon) {
  std::vector<std::vector<std::string>> phrases;
  phrases.reserve(lexicon.size());
  for (const auto& p : lexicon.phrases) phrases.push_back(p.tokens);
  return Matcher(phrases);
}

}  // namespace kaid
