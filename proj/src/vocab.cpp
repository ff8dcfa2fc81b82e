#include "kaid/vocab.hpp"

#include <set>

#include "kaid/error.hpp"

namespace kaid {
namespace {
const char* const kSpecials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[PLC]"};
}

Vocabulary::Vocabulary() : tokens_(kSpecials, kSpecials + kNumSpecial) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> documents) {
  std::set<std::string> words;
  for (const auto& d : documents) words.insert(d.begin(), d.end());
  std::vector<std::string> tokens(kSpecials, kSpecials + kNumSpecial);
  for (const auto& w : words) {
    if (w.size() > 2 && w.front() == '[' && w.back() == ']') continue;
    tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  KAID_REQUIRE(tokens.size() >= kNumSpecial, "vocabulary is missing the reserved special tokens");
  for (std::size_t i = 0; i < kNumSpecial; ++i) {
    KAID_REQUIRE(tokens[i] == kSpecials[i], std::string("vocabulary slot ") + std::to_string(i) + " must be " +
                                                kSpecials[i]);
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], i).second) throw ValidationError("duplicate vocabulary token: " + v.tokens_[i]);
  }
  return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::ids(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace kaid
