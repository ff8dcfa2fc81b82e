#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaid/entity_matcher.hpp"

namespace kaid {

// relation(e_1, ..., e_n) with the sentences that express it. n = 0 is kept
// at storage level for sentences without any entity mention.
struct KnowledgeFact {
  std::string relation;
  std::vector<std::string> entities;       // first-occurrence order, deduplicated
  std::vector<std::int64_t> sentence_ids;  // ascending, unique

  std::size_t arity() const { return entities.size(); }
  bool operator==(const KnowledgeFact&) const = default;
};

struct KnowledgeGraph {
  std::set<std::string> entities;
  std::set<std::string> relations;
  std::vector<KnowledgeFact> facts;  // canonical: relation, then entity list
  std::string provenance;
};

struct KgStats {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;
  std::size_t tuple_count = 0;     // facts with n >= 1
  std::size_t sentence_count = 0;  // distinct sentences behind those tuples
  std::size_t zero_entity_sentences = 0;

  bool operator==(const KgStats&) const = default;
};

// Entities of one annotated sentence, deduplicated in first-occurrence order.
std::vector<std::string> tuple_entities(const AnnotatedSentence& sentence);

KnowledgeGraph build_kg(std::span<const AnnotatedSentence> annotated, std::string provenance = {});
KgStats kg_stats(const KnowledgeGraph& kg);

enum class ExportMode { kBinaryOnly, kNary };
ExportMode parse_export_mode(std::string_view name);
std::string_view export_mode_name(ExportMode mode);

struct RelationExample {
  std::int64_t sentence_id = 0;
  std::vector<std::string> tokens;
  std::vector<std::size_t> entity_starts;  // token index of each entity's first mention
  std::string relation;
};

// One example per (sentence, fact) pair passing the arity filter: binary-only
// keeps n = 2, nary keeps everything including n = 0.
std::vector<RelationExample> export_training_set(const KnowledgeGraph& kg, std::span<const AnnotatedSentence> annotated,
                                                 ExportMode mode);

// Header record {entities, relations, tuples, sentences, provenance} then one
// {relation, entities, sentence_ids} record per fact in canonical order.
std::string kg_to_jsonl(const KnowledgeGraph& kg);
KnowledgeGraph kg_from_jsonl(const std::filesystem::path& path);

std::string examples_to_jsonl(std::span<const RelationExample> examples);
std::vector<RelationExample> examples_from_jsonl(const std::filesystem::path& path);

}  // namespace kaid
