#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "kaid/entity_matcher.hpp"
#include "kaid/infusion.hpp"
#include "kaid/vocab.hpp"

namespace kaid {

inline constexpr const char* kUnknownLabel = "UNKNOWN";

struct ClassificationExample {
  std::string text;
  std::string label;
};

struct ClassificationDataset {
  std::vector<std::string> classes;  // sorted, UNKNOWN included
  std::vector<ClassificationExample> examples;
  void validate() const;
};

struct MatchingExample {
  std::string q1;
  std::string q2;
  int s = 0;
};

struct MatchingDataset {
  std::vector<MatchingExample> examples;
  void validate() const;
};

// TSV with header "text\tlabel". The class map is the sorted label set plus
// UNKNOWN, unless `classes` is supplied.
std::string classification_to_tsv(const ClassificationDataset& data);
ClassificationDataset classification_from_tsv(const std::filesystem::path& path,
                                              const std::vector<std::string>& classes = {});
// TSV with header "q1\tq2\ts".
std::string matching_to_tsv(const MatchingDataset& data);
MatchingDataset matching_from_tsv(const std::filesystem::path& path);

TaskDataset to_task_dataset(const ClassificationDataset& data, const Vocabulary& vocab, const Matcher& matcher,
                            std::size_t max_len);
TaskDataset to_task_dataset(const MatchingDataset& data, const Vocabulary& vocab, const Matcher& matcher,
                            std::size_t max_len);

}  // namespace kaid
