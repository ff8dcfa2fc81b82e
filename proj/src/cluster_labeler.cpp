#include "kaid/cluster_labeler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {

double SparseVector::squared_norm() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * v;
  return s;
}

TfidfModel TfidfModel::fit(const Corpus& corpus) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& s : corpus.sentences) docs.push_back(s.tokens);
  return fit(docs);
}

TfidfModel TfidfModel::fit(std::span<const std::vector<std::string>> documents) {
  KAID_REQUIRE(!documents.empty(), "cannot fit tf-idf on an empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++df[t];
  }
  const double n = static_cast<double>(documents.size());
  std::vector<std::string> terms;
  std::vector<double> idf;
  terms.reserve(df.size());
  idf.reserve(df.size());
  for (const auto& [term, count] : df) {
    terms.push_back(term);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return from_parts(std::move(terms), std::move(idf), documents.size());
}

TfidfModel TfidfModel::from_parts(std::vector<std::string> terms, std::vector<double> idf, std::size_t documents) {
  KAID_REQUIRE(terms.size() == idf.size(), "tf-idf terms and idf values differ in length");
  TfidfModel m;
  m.terms_ = std::move(terms);
  m.idf_ = std::move(idf);
  m.document_count_ = documents;
  for (std::uint32_t i = 0; i < m.terms_.size(); ++i) m.index_.emplace(m.terms_[i], i);
  return m;
}

double TfidfModel::idf(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) throw ValidationError("term not in tf-idf vocabulary: " + term);
  return idf_[it->second];
}

SparseVector TfidfModel::transform(std::span<const std::string> tokens) const {
  std::map<std::uint32_t, double> tf;
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it != index_.end()) tf[it->second] += 1.0;
  }
  SparseVector v;
  v.entries.reserve(tf.size());
  double norm2 = 0.0;
  for (const auto& [i, count] : tf) {
    const double w = count * idf_[i];
    v.entries.emplace_back(i, w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

double squared_distance(const SparseVector& x, double x_norm2, const std::vector<double>& centroid,
                        double centroid_norm2) {
  double dot = 0.0;
  for (const auto& [i, v] : x.entries) dot += v * centroid[i];
  return std::max(0.0, x_norm2 - 2.0 * dot + centroid_norm2);
}

namespace {

double norm2(const std::vector<double>& c) {
  double s = 0.0;
  for (double v : c) s += v * v;
  return s;
}

std::vector<double> densify(const SparseVector& x, std::size_t dim) {
  std::vector<double> d(dim, 0.0);
  for (const auto& [i, v] : x.entries) d[i] = v;
  return d;
}

struct Assignment {
  std::vector<std::size_t> cluster;
  std::vector<double> distance;
  double objective = 0.0;
};

Assignment assign(std::span<const SparseVector> rows, std::span<const double> row_norms,
                  const std::vector<std::vector<double>>& centroids) {
  std::vector<double> cnorm(centroids.size());
  for (std::size_t c = 0; c < centroids.size(); ++c) cnorm[c] = norm2(centroids[c]);
  Assignment a;
  a.cluster.resize(rows.size());
  a.distance.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(rows[i], row_norms[i], centroids[c], cnorm[c]);
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    a.cluster[i] = best_c;
    a.distance[i] = best;
  }
  // Summed in row order so the objective is schedule-independent.
  for (double d : a.distance) a.objective += d;
  return a;
}

}  // namespace

Clustering kmeans(std::span<const SparseVector> rows, std::size_t dimension, const KMeansOptions& options) {
  const std::size_t n = rows.size();
  const std::size_t k = options.k;
  KAID_REQUIRE(k >= 1, "k must be at least 1");
  KAID_REQUIRE(k <= n, "k (" + std::to_string(k) + ") exceeds the number of vectors (" + std::to_string(n) + ")");
  KAID_REQUIRE(options.max_iter >= 1, "max_iter must be at least 1");
  for (const auto& r : rows) {
    for (const auto& [i, v] : r.entries) KAID_REQUIRE(i < dimension, "vector index out of range");
  }

  std::vector<double> row_norms(n);
  for (std::size_t i = 0; i < n; ++i) row_norms[i] = rows[i].squared_norm();

  // k-means++ seeding.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  centroids.push_back(densify(rows[first], dimension));
  chosen[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(rows[i], row_norms[i], centroids[0], norm2(centroids[0]));
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a centroid; take the first unused one.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centroids.push_back(densify(rows[pick], dimension));
    const double cn = norm2(centroids.back());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(rows[i], row_norms[i], centroids.back(), cn));
  }

  Clustering result;
  result.k = k;
  result.dimension = dimension;
  auto current = assign(rows, row_norms, centroids);
  result.objective_history.push_back(current.objective);

  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    std::vector<std::vector<double>> next(k, std::vector<double>(dimension, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[current.cluster[i]];
      for (const auto& [j, v] : rows[i].entries) c[j] += v;
      ++counts[current.cluster[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (auto& v : next[c]) v *= inv;
    }
    // Empty clusters are re-seeded at the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[current.cluster[i]] > 1 && current.distance[i] > far_d) {
          far_d = current.distance[i];
          far = i;
        }
      }
      if (far == n) continue;
      --counts[current.cluster[far]];
      current.cluster[far] = c;
      current.distance[far] = 0.0;
      counts[c] = 1;
      next[c] = densify(rows[far], dimension);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < dimension; ++j) {
        const double d = next[c][j] - centroids[c][j];
        s += d * d;
      }
      shift = std::max(shift, std::sqrt(s));
    }
    centroids = std::move(next);
    current = assign(rows, row_norms, centroids);
    result.objective_history.push_back(current.objective);
    result.iterations = iter;
    if (shift < options.tol) break;
  }
  result.centroids = std::move(centroids);
  result.assignments = std::move(current.cluster);
  result.objective = current.objective;
  return result;
}

Clustering kmeans(std::span<const std::vector<double>> points, const KMeansOptions& options) {
  KAID_REQUIRE(!points.empty(), "kmeans needs at least one point");
  const std::size_t dim = points.front().size();
  std::vector<SparseVector> rows(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    KAID_REQUIRE(points[i].size() == dim, "points differ in dimension");
    for (std::uint32_t j = 0; j < dim; ++j) {
      if (points[i][j] != 0.0) rows[i].entries.emplace_back(j, points[i][j]);
    }
  }
  return kmeans(rows, dim, options);
}

double clustering_objective(std::span<const SparseVector> rows, const Clustering& clustering) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = clustering.centroids[clustering.assignments[i]];
    total += squared_distance(rows[i], rows[i].squared_norm(), c, norm2(c));
  }
  return total;
}

std::vector<ClusterReport> cluster_representatives(const Clustering& clustering, std::span<const SparseVector> rows,
                                                   const Corpus& sample, std::size_t top_n) {
  KAID_REQUIRE(rows.size() == sample.size() && clustering.assignments.size() == rows.size(),
               "clustering, vectors and sample must describe the same sentences");
  std::vector<ClusterReport> reports(clustering.k);
  std::vector<std::vector<std::pair<double, std::int64_t>>> members(clustering.k);
  std::vector<double> cnorm(clustering.k);
  for (std::size_t c = 0; c < clustering.k; ++c) cnorm[c] = norm2(clustering.centroids[c]);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = clustering.assignments[i];
    const double d = squared_distance(rows[i], rows[i].squared_norm(), clustering.centroids[c], cnorm[c]);
    members[c].emplace_back(d, sample.sentences[i].id);
  }
  for (std::size_t c = 0; c < clustering.k; ++c) {
    auto& m = members[c];
    std::sort(m.begin(), m.end());
    reports[c].cluster = c;
    reports[c].size = m.size();
    for (std::size_t r = 0; r < std::min(top_n, m.size()); ++r) {
      reports[c].representatives.push_back(m[r].second);
      reports[c].distances.push_back(m[r].first);
    }
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const ClusterReport& a, const ClusterReport& b) { return a.size > b.size; });
  return reports;
}

std::string representatives_to_tsv(const std::vector<ClusterReport>& reports, const Corpus& sample) {
  std::map<std::int64_t, const Sentence*> by_id;
  for (const auto& s : sample.sentences) by_id[s.id] = &s;
  std::string out = "cluster\tsize\trank\tsentence_id\ttext\n";
  for (const auto& r : reports) {
    for (std::size_t rank = 0; rank < r.representatives.size(); ++rank) {
      const auto* s = by_id.at(r.representatives[rank]);
      std::string text = s->raw;
      std::replace(text.begin(), text.end(), '\t', ' ');
      std::replace(text.begin(), text.end(), '\n', ' ');
      out += std::to_string(r.cluster) + "\t" + std::to_string(r.size) + "\t" + std::to_string(rank + 1) + "\t" +
             std::to_string(s->id) + "\t" + text + "\n";
    }
  }
  return out;
}

RelationLabelFile parse_label_file(const std::filesystem::path& path, std::size_t k) {
  return parse_label_file(io::read_lines(path), k, path.string());
}

RelationLabelFile parse_label_file(const std::vector<std::string>& lines, std::size_t k, const std::string& origin) {
  RelationLabelFile labels;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto where = origin + ":" + std::to_string(i + 1);
    if (line.empty() || line[0] == '#') continue;
    if (i == 0 && line.rfind("cluster\t", 0) == 0) continue;
    auto cols = io::split(line, '\t');
    if (cols.size() != 2) throw ValidationError(where + ": expected \"cluster<TAB>relation_name\"");
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      auto v = std::stoll(cols[0], &used);
      if (used != cols[0].size() || v < 0) throw std::invalid_argument("index");
      idx = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ValidationError(where + ": cluster index '" + cols[0] + "' is not a non-negative integer");
    }
    if (idx >= k) throw ValidationError(where + ": cluster index " + cols[0] + " outside [0, " + std::to_string(k) + ")");
    auto name = cols[1];
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
    if (name.empty()) throw ValidationError(where + ": empty relation name");
    if (labels.count(idx)) throw ValidationError(where + ": cluster " + cols[0] + " is named twice");
    labels[idx] = name;
  }
  return labels;
}

std::string label_file_to_tsv(const RelationLabelFile& labels) {
  std::string out = "cluster\trelation_name\n";
  for (const auto& [c, name] : labels) out += std::to_string(c) + "\t" + name + "\n";
  return out;
}

LabeledSet apply_labels(const Clustering& clustering, const RelationLabelFile& labels, const Corpus& sample) {
  KAID_REQUIRE(clustering.assignments.size() == sample.size(), "clustering does not match the sample");
  for (const auto& [c, name] : labels) {
    KAID_REQUIRE(c < clustering.k, "label file names cluster " + std::to_string(c) + " outside [0, k)");
  }
  LabeledSet set;
  std::set<std::string> names;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto it = labels.find(clustering.assignments[i]);
    if (it == labels.end()) continue;
    const auto& s = sample.sentences[i];
    set.examples.push_back(LabeledExample{s.id, s.tokens, it->second});
    names.insert(it->second);
  }
  set.relations.assign(names.begin(), names.end());
  return set;
}

}  // namespace kaid
