#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kaid {

// Token ids with [PAD] [UNK] [CLS] [SEP] [PLC] reserved at 0..4; the rest
// sorted lexicographically.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;
  static constexpr std::size_t kPlc = 4;
  static constexpr std::size_t kNumSpecial = 5;

  Vocabulary();
  static Vocabulary build(std::span<const std::vector<std::string>> documents);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t id(const std::string& token) const;
  std::vector<std::size_t> ids(std::span<const std::string> tokens) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace kaid
