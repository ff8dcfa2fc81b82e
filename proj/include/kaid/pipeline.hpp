#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kaid/distillation.hpp"
#include "kaid/infusion.hpp"
#include "kaid/kg_store.hpp"
#include "kaid/phrase_miner.hpp"
#include "kaid/relation_classifier.hpp"
#include "kaid/synthetic.hpp"

namespace kaid {

// Every setting of a pipeline run. Files use one "key = value" per line with
// '#' comments; lists are comma separated. Empty paths fall back to the
// synthetic domain written by the synth stage.
struct PipelineConfig {
  std::filesystem::path workdir = "work";
  std::uint64_t seed = 0;
  std::filesystem::path corpus_path;
  std::string corpus_format = "plain";

  SyntheticSpec synth;
  MinerConfig mine;

  std::size_t cluster_k = 15;
  std::size_t cluster_sample = 1000;
  std::size_t cluster_max_iter = 100;
  std::size_t cluster_restarts = 5;
  std::size_t cluster_representatives = 10;
  std::filesystem::path cluster_oracle_truth;
  std::filesystem::path labels_path;

  ClassifierConfig classifier;
  double annotate_floor = 0.0;
  std::string kg_export = "nary";

  KaidConfig model;
  bool taps_set = false;
  TrainConfig pretrain{3, 1e-3, 16, 0};
  std::size_t pretrain_max_examples = 3000;

  std::string task_kind = "classification";
  std::filesystem::path task_train;
  std::filesystem::path task_test;
  TrainConfig finetune{10, 1e-3, 16, 0};
  std::vector<std::uint64_t> grid_seeds{1, 2, 3};
  std::vector<double> grid_lrs{1e-3};
  std::size_t grid_threads = 1;

  std::filesystem::path distill_unlabeled;
  double distill_ratio = 2.0;
  StudentConfig student;
  TrainConfig distill{15, 3e-3, 16, 0};

  std::size_t bench_repetitions = 5;
  std::size_t bench_examples = 200;

  // Collects problems instead of throwing so all of them can be reported.
  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);
  std::vector<std::string> errors() const;
  void validate() const;

  std::vector<std::string> keys() const;
  std::string get(const std::string& key) const;
  std::string canonical() const;  // sorted "key = value" lines
  std::string hash() const;

  std::filesystem::path corpus() const;
  std::filesystem::path train_path() const;
  std::filesystem::path test_path() const;
  std::filesystem::path unlabeled_path() const;
  std::filesystem::path labels() const;
  KaidConfig model_config() const;  // taps derived when not set explicitly

 private:
  std::vector<std::string> parse_errors_;
};

const std::vector<std::string>& stage_names();

// Runs one stage against the config's workdir. Throws ValidationError for
// bad input or missing prerequisites, RuntimeFailure otherwise. Returns a
// one-line human summary.
std::string run_stage(const std::string& stage, const PipelineConfig& config);

}  // namespace kaid
