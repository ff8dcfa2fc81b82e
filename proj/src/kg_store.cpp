#include "kaid/kg_store.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {

std::vector<std::string> tuple_entities(const AnnotatedSentence& sentence) {
  std::vector<std::string> entities;
  for (const auto& m : sentence.mentions) {
    if (std::find(entities.begin(), entities.end(), m.phrase) == entities.end()) entities.push_back(m.phrase);
  }
  return entities;
}

KnowledgeGraph build_kg(std::span<const AnnotatedSentence> annotated, std::string provenance) {
  std::map<std::pair<std::string, std::vector<std::string>>, std::vector<std::int64_t>> merged;
  for (const auto& a : annotated) {
    if (!a.relation) {
      throw ValidationError("sentence " + std::to_string(a.sentence.id) + " has no relation annotation");
    }
    merged[{*a.relation, tuple_entities(a)}].push_back(a.sentence.id);
  }
  KnowledgeGraph kg;
  kg.provenance = std::move(provenance);
  kg.facts.reserve(merged.size());
  for (auto& [key, ids] : merged) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    kg.relations.insert(key.first);
    kg.entities.insert(key.second.begin(), key.second.end());
    kg.facts.push_back(KnowledgeFact{key.first, key.second, std::move(ids)});
  }
  return kg;
}

KgStats kg_stats(const KnowledgeGraph& kg) {
  KgStats st;
  st.entity_count = kg.entities.size();
  st.relation_count = kg.relations.size();
  std::set<std::int64_t> tuple_sentences;
  std::set<std::int64_t> empty_sentences;
  for (const auto& f : kg.facts) {
    if (f.arity() == 0) {
      empty_sentences.insert(f.sentence_ids.begin(), f.sentence_ids.end());
      continue;
    }
    ++st.tuple_count;
    tuple_sentences.insert(f.sentence_ids.begin(), f.sentence_ids.end());
  }
  st.sentence_count = tuple_sentences.size();
  st.zero_entity_sentences = empty_sentences.size();
  if (st.sentence_count < st.tuple_count) {
    throw RuntimeFailure("knowledge graph has fewer sentences than tuples; a fact lost its sentences");
  }
  return st;
}

ExportMode parse_export_mode(std::string_view name) {
  if (name == "binary" || name == "binary-only") return ExportMode::kBinaryOnly;
  if (name == "nary") return ExportMode::kNary;
  throw ValidationError("unknown export mode '" + std::string(name) + "' (expected binary-only or nary)");
}

std::string_view export_mode_name(ExportMode mode) { return mode == ExportMode::kBinaryOnly ? "binary-only" : "nary"; }

std::vector<RelationExample> export_training_set(const KnowledgeGraph& kg, std::span<const AnnotatedSentence> annotated,
                                                 ExportMode mode) {
  std::unordered_map<std::int64_t, const AnnotatedSentence*> by_id;
  for (const auto& a : annotated) by_id[a.sentence.id] = &a;
  std::vector<RelationExample> out;
  for (const auto& f : kg.facts) {
    if (mode == ExportMode::kBinaryOnly && f.arity() != 2) continue;
    for (auto id : f.sentence_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ValidationError("sentence " + std::to_string(id) + " missing from annotations");
      const auto& a = *it->second;
      RelationExample ex;
      ex.sentence_id = id;
      ex.tokens = a.sentence.tokens;
      ex.relation = f.relation;
      for (const auto& entity : f.entities) {
        auto m = std::find_if(a.mentions.begin(), a.mentions.end(), [&](const Mention& x) { return x.phrase == entity; });
        if (m == a.mentions.end()) {
          throw ValidationError("sentence " + std::to_string(id) + " has no mention of entity '" + entity + "'");
        }
        ex.entity_starts.push_back(m->start);
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::string kg_to_jsonl(const KnowledgeGraph& kg) {
  const auto st = kg_stats(kg);
  nlohmann::ordered_json header;
  header["entities"] = st.entity_count;
  header["relations"] = st.relation_count;
  header["tuples"] = st.tuple_count;
  header["sentences"] = st.sentence_count;
  header["provenance"] = kg.provenance;
  std::string out = header.dump() + "\n";
  for (const auto& f : kg.facts) {
    nlohmann::ordered_json j;
    j["relation"] = f.relation;
    j["entities"] = f.entities;
    j["sentence_ids"] = f.sentence_ids;
    out += j.dump() + "\n";
  }
  return out;
}

KnowledgeGraph kg_from_jsonl(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  KnowledgeGraph kg;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto where = path.string() + ":" + std::to_string(i + 1);
    try {
      auto j = nlohmann::json::parse(lines[i]);
      if (!header_seen) {
        if (!j.contains("provenance")) throw ValidationError(where + ": missing KG header record");
        kg.provenance = j["provenance"].get<std::string>();
        header_seen = true;
        continue;
      }
      KnowledgeFact f;
      f.relation = j.at("relation").get<std::string>();
      f.entities = j.at("entities").get<std::vector<std::string>>();
      f.sentence_ids = j.at("sentence_ids").get<std::vector<std::int64_t>>();
      if (f.sentence_ids.empty()) throw ValidationError(where + ": fact without sentences");
      std::sort(f.sentence_ids.begin(), f.sentence_ids.end());
      kg.relations.insert(f.relation);
      kg.entities.insert(f.entities.begin(), f.entities.end());
      kg.facts.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": malformed KG record: " + e.what());
    }
  }
  std::sort(kg.facts.begin(), kg.facts.end(), [](const KnowledgeFact& a, const KnowledgeFact& b) {
    return std::tie(a.relation, a.entities) < std::tie(b.relation, b.entities);
  });
  return kg;
}

std::string examples_to_jsonl(std::span<const RelationExample> examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::ordered_json j;
    j["sentence_id"] = ex.sentence_id;
    j["tokens"] = ex.tokens;
    j["entity_starts"] = ex.entity_starts;
    j["relation"] = ex.relation;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<RelationExample> examples_from_jsonl(const std::filesystem::path& path) {
  std::vector<RelationExample> out;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      RelationExample ex;
      ex.sentence_id = j.at("sentence_id").get<std::int64_t>();
      ex.tokens = j.at("tokens").get<std::vector<std::string>>();
      ex.entity_starts = j.at("entity_starts").get<std::vector<std::size_t>>();
      ex.relation = j.at("relation").get<std::string>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": malformed example: " + e.what());
    }
  }
  return out;
}

}  // namespace kaid
