#include "kaid/datasets.hpp"

#include <algorithm>
#include <set>

#include "kaid/corpus.hpp"
#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {
namespace {

std::string clean_field(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), '\t', ' ');
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path, const std::vector<std::string>& header) {
  if (!std::filesystem::exists(path)) throw ValidationError("dataset file not found: " + path.string());
  const auto lines = io::read_lines(path);
  KAID_REQUIRE(!lines.empty() && io::split(lines[0], '\t') == header,
               path.string() + ": expected header '" + io::join(header, "\\t") + "'");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = io::split(lines[i], '\t');
    if (fields.size() != header.size())
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": expected " +
                            std::to_string(header.size()) + " tab-separated fields, got " +
                            std::to_string(fields.size()));
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

void ClassificationDataset::validate() const {
  KAID_REQUIRE(std::find(classes.begin(), classes.end(), kUnknownLabel) != classes.end(),
               "classification class map must contain UNKNOWN");
  std::set<std::string> known(classes.begin(), classes.end());
  KAID_REQUIRE(known.size() == classes.size(), "classification class map has duplicates");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!known.count(examples[i].label))
      throw ValidationError("example " + std::to_string(i) + " has label '" + examples[i].label +
                            "' missing from the class map");
  }
}

void MatchingDataset::validate() const {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].s != 0 && examples[i].s != 1)
      throw ValidationError("matching example " + std::to_string(i) + " has non-binary label " +
                            std::to_string(examples[i].s));
  }
}

std::string classification_to_tsv(const ClassificationDataset& data) {
  std::string out = "text\tlabel\n";
  for (const auto& ex : data.examples) out += clean_field(ex.text) + "\t" + clean_field(ex.label) + "\n";
  return out;
}

ClassificationDataset classification_from_tsv(const std::filesystem::path& path,
                                              const std::vector<std::string>& classes) {
  ClassificationDataset data;
  std::set<std::string> labels;
  for (auto& row : read_tsv(path, {"text", "label"})) {
    labels.insert(row[1]);
    data.examples.push_back({std::move(row[0]), std::move(row[1])});
  }
  if (classes.empty()) {
    labels.insert(kUnknownLabel);
    data.classes.assign(labels.begin(), labels.end());
  } else {
    data.classes = classes;
  }
  data.validate();
  return data;
}

std::string matching_to_tsv(const MatchingDataset& data) {
  std::string out = "q1\tq2\ts\n";
  for (const auto& ex : data.examples)
    out += clean_field(ex.q1) + "\t" + clean_field(ex.q2) + "\t" + std::to_string(ex.s) + "\n";
  return out;
}

MatchingDataset matching_from_tsv(const std::filesystem::path& path) {
  MatchingDataset data;
  for (auto& row : read_tsv(path, {"q1", "q2", "s"})) {
    if (row[2] != "0" && row[2] != "1")
      throw ValidationError(path.string() + ": matching label must be 0 or 1, got '" + row[2] + "'");
    data.examples.push_back({std::move(row[0]), std::move(row[1]), row[2] == "1" ? 1 : 0});
  }
  return data;
}

TaskDataset to_task_dataset(const ClassificationDataset& data, const Vocabulary& vocab, const Matcher& matcher,
                            std::size_t max_len) {
  data.validate();
  TaskDataset task;
  task.kind = TaskKind::kClassification;
  task.classes = data.classes;
  for (const auto& ex : data.examples) {
    TaskExample t;
    t.tokens = tokenize(ex.text);
    const auto mentions = matcher.find_mentions(t.tokens);
    t.input = encode_input(t.tokens, std::span<const Mention>(mentions), vocab, max_len);
    t.label = static_cast<std::size_t>(std::find(data.classes.begin(), data.classes.end(), ex.label) -
                                       data.classes.begin());
    task.examples.push_back(std::move(t));
  }
  return task;
}

TaskDataset to_task_dataset(const MatchingDataset& data, const Vocabulary& vocab, const Matcher& matcher,
                            std::size_t max_len) {
  data.validate();
  TaskDataset task;
  task.kind = TaskKind::kMatching;
  task.classes = {"0", "1"};
  for (const auto& ex : data.examples) {
    TaskExample t;
    const auto q1 = tokenize(ex.q1);
    const auto q2 = tokenize(ex.q2);
    const auto m1 = matcher.find_mentions(q1);
    const auto m2 = matcher.find_mentions(q2);
    t.input = encode_pair(q1, m1, q2, m2, vocab, max_len);
    t.tokens = q1;
    t.tokens.push_back("[SEP]");
    t.tokens.insert(t.tokens.end(), q2.begin(), q2.end());
    t.label = static_cast<std::size_t>(ex.s);
    task.examples.push_back(std::move(t));
  }
  return task;
}

}  // namespace kaid
