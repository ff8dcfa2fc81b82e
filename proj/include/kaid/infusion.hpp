#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaid/entity_matcher.hpp"
#include "kaid/kg_store.hpp"
#include "kaid/layers.hpp"
#include "kaid/vocab.hpp"

namespace kaid {

struct KaidConfig {
  std::size_t layers = 4;  // L1
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t adapter_layers = 3;  // L2
  std::size_t adapter_hidden = 48;
  std::size_t adapter_heads = 4;
  std::vector<std::size_t> taps{0, 1, 3};
  std::size_t num_relations = 0;
  std::size_t max_len = 64;
  bool use_adapter = true;
  double init_std = 0.02;

  // {0, ceil(L1/2)-1, L1-1} for three adapter layers; otherwise evenly spaced.
  static std::vector<std::size_t> default_taps(std::size_t l1, std::size_t l2);
  std::vector<std::string> errors() const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static KaidConfig from_json(const nlohmann::json& j);
};

struct EncodedSentence {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> entity_starts;  // [1] followed by shifted mention starts
};

void validate_encoded(const EncodedSentence& encoded);

// [CLS] [PLC] tokens... [SEP], cut to max_len; mentions that no longer fit are dropped.
EncodedSentence encode_input(std::span<const std::string> tokens, std::span<const Mention> mentions,
                             const Vocabulary& vocab, std::size_t max_len);
EncodedSentence encode_input(std::span<const std::string> tokens, std::span<const std::size_t> entity_starts,
                             const Vocabulary& vocab, std::size_t max_len);
// [CLS] [PLC] q1 [SEP] q2 [SEP]; mentions from both questions are kept.
EncodedSentence encode_pair(std::span<const std::string> q1, std::span<const Mention> m1,
                            std::span<const std::string> q2, std::span<const Mention> m2, const Vocabulary& vocab,
                            std::size_t max_len);

struct AdapterBlock {
  nn::Linear down;  // H -> H_A
  nn::EncoderLayer layer;
};

struct ForwardTrace {
  std::vector<nn::Var> backbone;  // X1, one per layer
  std::vector<nn::Var> adapter;   // adapter block outputs
  nn::Var fused;                  // X3
  nn::Var pooled;                 // X4
  nn::Var logits;                 // X5
};

struct HeadInfo {
  std::vector<std::string> classes;
  nn::Linear projection;
};

class KaidModel {
 public:
  KaidModel(const KaidConfig& config, Vocabulary vocab, std::uint64_t seed);

  const KaidConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t fused_width() const;

  // Replaces any head of the same name with a freshly initialised projection.
  void add_head(const std::string& name, std::vector<std::string> classes, std::uint64_t seed);
  bool has_head(const std::string& name) const { return heads_.count(name) > 0; }
  const std::vector<std::string>& head_classes(const std::string& name) const;

  ForwardTrace forward(nn::Tape& tape, const EncodedSentence& encoded, const std::string& head) const;
  std::vector<double> logits(const EncodedSentence& encoded, const std::string& head) const;

  // Partition by name prefix: "backbone.", "adapter.", "heads.".
  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> parameters(const std::string& component);
  std::vector<const nn::Parameter*> parameters(const std::string& component) const;
  std::size_t parameter_count() const;
  std::size_t parameter_count(const std::string& component) const;
  void set_trainable(const std::function<bool(const std::string& name)>& predicate);

  bool adapter_pretrained() const { return adapter_pretrained_; }
  void mark_adapter_pretrained() { adapter_pretrained_ = true; }

  void save(const std::filesystem::path& base) const;
  static KaidModel load(const std::filesystem::path& base);

 private:
  KaidConfig config_;
  Vocabulary vocab_;
  nn::Parameter token_embedding_;
  nn::Parameter position_embedding_;
  nn::LayerNorm embedding_norm_;
  std::vector<nn::EncoderLayer> backbone_;
  std::vector<AdapterBlock> adapter_;
  std::map<std::string, HeadInfo> heads_;
  bool adapter_pretrained_ = false;
};

// Bytes of every parameter in a component hashed with FNV-1a.
std::uint64_t component_checksum(const KaidModel& model, const std::string& component);

struct TrainConfig {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::vector<std::string> errors() const;
  void validate() const;
};

using StepCallback = std::function<void(std::size_t step)>;

struct TrainReport {
  std::vector<double> loss_history;      // mean loss per epoch
  std::vector<double> accuracy_history;  // training accuracy per epoch
  std::size_t steps = 0;
};

// Relation classification over KG-derived examples. Only adapter parameters
// and the "relation" head move.
TrainReport pretrain_adapter(KaidModel& model, std::span<const RelationExample> examples,
                             std::span<const std::string> relations, const TrainConfig& config,
                             const StepCallback& on_step = {});

enum class TaskKind { kClassification, kMatching };
TaskKind parse_task_kind(const std::string& name);
std::string task_kind_name(TaskKind kind);

struct TaskExample {
  std::vector<std::string> tokens;  // plain tokens (both questions joined for matching)
  EncodedSentence input;
  std::size_t label = 0;
};

struct TaskDataset {
  TaskKind kind = TaskKind::kClassification;
  std::vector<std::string> classes;
  std::vector<TaskExample> examples;
  void validate() const;
};

// Backbone plus a fresh "task" head train; the adapter stays frozen.
TrainReport finetune(KaidModel& model, const TaskDataset& dataset, const TrainConfig& config,
                     const StepCallback& on_step = {});

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

Prediction predict(const KaidModel& model, const EncodedSentence& encoded, const std::string& head = "task");

struct ConfidenceStats {
  double mean_max = 0.0;
  double variance_max = 0.0;
};

ConfidenceStats confidence_stats(std::span<const std::vector<double>> probabilities);

}  // namespace kaid
