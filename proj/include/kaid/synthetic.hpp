#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kaid/cluster_labeler.hpp"
#include "kaid/corpus.hpp"
#include "kaid/datasets.hpp"
#include "kaid/entity_matcher.hpp"
#include "kaid/kg_store.hpp"

namespace kaid {

// Sentences are stopword-only templates whose slots hold phrase tuples.
// Relation-specific templates are used at relation_template_rate, shared
// ones otherwise; task datasets and the unlabeled pool use shared templates
// only, so there the phrases alone carry the label. Between two slots there
// are always at least three template words. A noise word is inserted into
// each gap between segments with probability noise_rate; noise words come
// from a large vocabulary disjoint from phrase words.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t num_relations = 5;
  std::size_t phrases_per_relation = 4;
  std::size_t sentences = 5000;
  double noise_rate = 0.2;
  double unknown_rate = 0.1;
  double seen_fraction = 0.5;  // share of each relation's phrases allowed in training splits
  bool unseen_test = false;    // test splits draw only phrases absent from training splits
  double relation_template_rate = 0.5;
  std::size_t neutral_templates = 100;  // per arity
  std::size_t train_examples = 300;
  std::size_t test_examples = 400;
  std::size_t matching_train = 300;
  std::size_t matching_test = 300;
  std::size_t unlabeled = 600;
  std::size_t noise_vocabulary = 20000;

  std::vector<std::string> errors() const;
  void validate() const;
};

struct PlantedPhrase {
  std::vector<std::string> tokens;
  std::size_t relation = 0;
  bool seen = false;
  std::string text() const;
};

struct SentenceTruth {
  std::optional<std::size_t> relation;  // empty for UNKNOWN sentences
  std::vector<std::size_t> phrases;     // planted phrase ids in sentence order
  std::vector<Mention> mentions;
};

struct SyntheticDomain {
  SyntheticSpec spec;
  std::vector<std::string> relations;
  std::vector<PlantedPhrase> phrases;
  Corpus corpus;
  std::vector<SentenceTruth> truth;  // aligned with corpus.sentences
  KnowledgeGraph golden_kg;
  ClassificationDataset train;
  ClassificationDataset test;
  MatchingDataset matching_train;
  MatchingDataset matching_test;
  std::vector<std::string> unlabeled;
};

inline constexpr const char* kOtherRelation = "other";

SyntheticDomain generate_synthetic_domain(const SyntheticSpec& spec);

// Golden mentions with golden relation names; UNKNOWN sentences get "other".
std::vector<AnnotatedSentence> golden_annotations(const SyntheticDomain& domain);

// Simulated expert: each cluster is named after the majority golden relation
// of its members (ties to the smaller name; UNKNOWN counts as "other").
RelationLabelFile oracle_cluster_labels(const Clustering& clustering, const Corpus& sample,
                                        const std::vector<std::string>& relation_by_sentence);
RelationLabelFile oracle_cluster_labels(const Clustering& clustering, const Corpus& sample,
                                        const SyntheticDomain& domain);
std::vector<std::string> truth_relations(const SyntheticDomain& domain);

// Writes corpus.txt, planted_phrases.tsv, truth.jsonl, golden_kg.jsonl,
// relations.tsv, classification_{train,test}.tsv, matching_{train,test}.tsv
// and unlabeled.txt.
void write_synthetic_domain(const SyntheticDomain& domain, const std::filesystem::path& dir);

// Sentence id -> golden relation name, read back from truth.jsonl.
std::vector<std::string> read_truth_relations(const std::filesystem::path& truth_jsonl);

}  // namespace kaid
