#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kaid/corpus.hpp"

namespace kaid {

struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index

  double squared_norm() const;
};

// Raw tf times smoothed idf: idf(t) = ln((1 + N) / (1 + df(t))) + 1.
class TfidfModel {
 public:
  [[nodiscard]] static TfidfModel fit(const Corpus& corpus);
  [[nodiscard]] static TfidfModel fit(std::span<const std::vector<std::string>> documents);

  // L2-normalized document vector; all-OOV documents map to the zero vector.
  SparseVector transform(std::span<const std::string> tokens) const;

  std::size_t dimension() const { return terms_.size(); }
  std::size_t document_count() const { return document_count_; }
  double idf(const std::string& term) const;
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf_values() const { return idf_; }

  static TfidfModel from_parts(std::vector<std::string> terms, std::vector<double> idf, std::size_t documents);

 private:
  std::vector<std::string> terms_;  // sorted; column index = position
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<double> idf_;
  std::size_t document_count_ = 0;
};

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

struct Clustering {
  std::size_t k = 0;
  std::size_t dimension = 0;
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignments;  // row -> cluster
  double objective = 0.0;
  std::vector<double> objective_history;  // one entry per assignment step
  std::size_t iterations = 0;
};

double squared_distance(const SparseVector& x, double x_norm2, const std::vector<double>& centroid,
                        double centroid_norm2);

// k-means++ seeding followed by Lloyd iterations. Deterministic per seed.
Clustering kmeans(std::span<const SparseVector> rows, std::size_t dimension, const KMeansOptions& options);
Clustering kmeans(std::span<const std::vector<double>> points, const KMeansOptions& options);

double clustering_objective(std::span<const SparseVector> rows, const Clustering& clustering);

struct ClusterReport {
  std::size_t cluster = 0;
  std::size_t size = 0;
  std::vector<std::int64_t> representatives;  // sentence ids, nearest first
  std::vector<double> distances;
};

// Clusters ordered by size (desc), representatives by distance to centroid
// (asc, ties to the smaller sentence id). `rows[i]` belongs to sample.sentences[i].
std::vector<ClusterReport> cluster_representatives(const Clustering& clustering, std::span<const SparseVector> rows,
                                                   const Corpus& sample, std::size_t top_n);

// TSV {cluster, size, rank, sentence_id, text}.
std::string representatives_to_tsv(const std::vector<ClusterReport>& reports, const Corpus& sample);

using RelationLabelFile = std::map<std::size_t, std::string>;

// TSV {cluster, relation_name}; an optional "cluster\trelation_name" header.
RelationLabelFile parse_label_file(const std::filesystem::path& path, std::size_t k);
RelationLabelFile parse_label_file(const std::vector<std::string>& lines, std::size_t k, const std::string& origin);
std::string label_file_to_tsv(const RelationLabelFile& labels);

struct LabeledExample {
  std::int64_t sentence_id = 0;
  std::vector<std::string> tokens;
  std::string relation;
};

struct LabeledSet {
  std::vector<LabeledExample> examples;
  std::vector<std::string> relations;  // distinct names, sorted
};

LabeledSet apply_labels(const Clustering& clustering, const RelationLabelFile& labels, const Corpus& sample);

}  // namespace kaid
