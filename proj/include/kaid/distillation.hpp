#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaid/infusion.hpp"
#include "kaid/layers.hpp"
#include "kaid/metrics.hpp"
#include "kaid/vocab.hpp"

namespace kaid {

enum class Origin { kOriginal, kAugmented };
std::string origin_name(Origin origin);  // "D_O" / "D_A"
Origin parse_origin(const std::string& name);

struct DistillExample {
  std::vector<std::string> tokens;
  std::size_t label = 0;  // golden for D_O, teacher argmax for D_A
  std::vector<double> p;  // teacher distribution
  Origin origin = Origin::kOriginal;
};

struct StudentConfig {
  std::size_t embedding_dim = 64;
  std::vector<std::size_t> windows{2, 3, 4};
  std::size_t filters = 32;
  std::size_t classes = 0;
  double lambda = 0.9;
  double init_std = 0.1;

  std::vector<std::string> errors() const;
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static StudentConfig from_json(const nlohmann::json& j);
};

// Embedding -> per-width convolution + ReLU -> max over time -> concat -> linear.
class CnnStudent {
 public:
  CnnStudent(const StudentConfig& config, Vocabulary vocab, std::uint64_t seed);

  const StudentConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }

  nn::Var forward(nn::Tape& tape, std::span<const std::string> tokens) const;
  std::vector<double> logits(std::span<const std::string> tokens) const;
  std::size_t predict(std::span<const std::string> tokens) const;

  std::vector<nn::Parameter*> parameters();
  std::size_t parameter_count() const;
  std::size_t parameter_count_excluding_embeddings() const;

  void save(const std::filesystem::path& base, const std::vector<std::string>& classes) const;
  static CnnStudent load(const std::filesystem::path& base, std::vector<std::string>* classes = nullptr);

 private:
  StudentConfig config_;
  Vocabulary vocab_;
  nn::Parameter embedding_;
  std::vector<nn::Linear> convs_;
  nn::Linear output_;
};

// lambda * C(p, q) + (1 - lambda) * C(g, q), q = softmax(logits).
nn::Var distill_loss(nn::Var logits, std::span<const double> p, std::span<const double> g, double lambda);
double distill_loss_value(std::span<const double> p, std::span<const double> logits, std::span<const double> g,
                          double lambda);

// Teacher distributions for every unlabeled sentence, in input order.
std::vector<DistillExample> pseudo_label(const KaidModel& teacher, std::span<const TaskExample> unlabeled,
                                         std::size_t expected_classes, const std::string& head = "task",
                                         std::size_t threads = 1);

struct DistillReport {
  double teacher_metric = 0.0;  // macro-F1 on the evaluation set
  double student_metric = 0.0;
  double gap = 0.0;  // teacher - student
  std::size_t teacher_params = 0;
  std::size_t student_params = 0;  // excluding word embeddings
  std::size_t original_examples = 0;
  std::size_t augmented_examples = 0;
  std::vector<double> loss_history;
};

struct DistillResult {
  CnnStudent student;
  std::vector<DistillExample> data;  // D_O then D_A
  DistillReport report;
};

// D_O carries golden labels with the teacher's p alongside; D_A is
// pseudo-labelled. The student vocabulary comes from D.
DistillResult train_student(const KaidModel& teacher, std::span<const TaskExample> original,
                            std::span<const TaskExample> unlabeled, std::span<const TaskExample> evaluation,
                            const StudentConfig& config, const TrainConfig& train);

// JSONL {text, label, origin, p}.
std::string distill_examples_to_jsonl(std::span<const DistillExample> data, std::span<const std::string> classes);

}  // namespace kaid
