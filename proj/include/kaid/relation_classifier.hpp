#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kaid/cluster_labeler.hpp"
#include "kaid/corpus.hpp"
#include "kaid/entity_matcher.hpp"

namespace kaid {

struct ClassifierConfig {
  std::size_t epochs = 300;
  double lr = 0.5;  // <= 1/L for unit-norm tf-idf rows plus bias, so full-batch loss never rises
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

// Row-major |R| x |V| weights plus bias; label order is fixed at train time.
struct LinearParams {
  std::size_t classes = 0;
  std::size_t features = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

// Mean cross-entropy plus (l2 / 2) * ||W||^2. Fills the gradient when asked.
double softmax_regression_loss(const LinearParams& params, std::span<const SparseVector> rows,
                               std::span<const std::size_t> targets, double l2, LinearParams* gradient);

class RelationClassifier {
 public:
  RelationClassifier(TfidfModel tfidf, std::vector<std::string> labels, LinearParams params);

  std::vector<double> probabilities(std::span<const std::string> tokens) const;
  // (label, confidence); ties go to the earlier label.
  std::pair<std::string, double> predict(std::span<const std::string> tokens) const;
  std::size_t predict_index(std::span<const std::string> tokens) const;

  const std::vector<std::string>& labels() const { return labels_; }
  const TfidfModel& tfidf() const { return tfidf_; }
  const LinearParams& params() const { return params_; }

  std::string to_json() const;
  static RelationClassifier from_json(const std::string& text);

 private:
  TfidfModel tfidf_;
  std::vector<std::string> labels_;
  LinearParams params_;
};

RelationClassifier train_relation_classifier(const LabeledSet& data, const ClassifierConfig& config,
                                             std::vector<double>* loss_history = nullptr);

std::pair<std::string, double> predict_relation(const RelationClassifier& classifier, const Sentence& sentence);

std::vector<AnnotatedSentence> annotate_corpus(const RelationClassifier& classifier, const Matcher& matcher,
                                               const Corpus& corpus, double confidence_floor = 0.0);

// JSONL {id, tokens, mentions:[{start,end,phrase}], relation, confidence, flagged}.
std::string annotations_to_jsonl(std::span<const AnnotatedSentence> annotated);
std::vector<AnnotatedSentence> annotations_from_jsonl(const std::filesystem::path& path);

}  // namespace kaid
