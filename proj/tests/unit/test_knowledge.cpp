#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "../oracles.hpp"
#include "kaid/cluster_labeler.hpp"
#include "kaid/error.hpp"
#include "kaid/io.hpp"
#include "kaid/kg_store.hpp"
#include "kaid/relation_classifier.hpp"

using namespace kaid;

namespace {

AnnotatedSentence annotated(std::int64_t id, std::vector<std::string> tokens, std::vector<Mention> mentions,
                            std::string relation) {
  AnnotatedSentence a;
  a.sentence.id = id;
  a.sentence.tokens = std::move(tokens);
  a.mentions = std::move(mentions);
  a.relation = std::move(relation);
  return a;
}

}  // namespace

TEST_CASE("tf-idf matches hand-derived values on three documents") {
  // a b | a c | a b b :  df(a)=3, df(b)=2, df(c)=1, N=3
  const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"a", "c"}, {"a", "b", "b"}};
  const auto tf = TfidfModel::fit(docs);
  const double ia = std::log(4.0 / 4.0) + 1.0;
  const double ib = std::log(4.0 / 3.0) + 1.0;
  const double ic = std::log(4.0 / 2.0) + 1.0;
  CHECK(std::abs(tf.idf("a") - ia) <= 1e-12);
  CHECK(std::abs(tf.idf("b") - ib) <= 1e-12);
  CHECK(std::abs(tf.idf("c") - ic) <= 1e-12);
  CHECK(tf.dimension() == 3);

  const auto v = tf.transform(std::vector<std::string>{"a", "b", "b"});
  const double norm = std::sqrt(ia * ia + 4 * ib * ib);
  REQUIRE(v.entries.size() == 2);
  CHECK(v.entries[0].first == 0);
  CHECK(std::abs(v.entries[0].second - ia / norm) <= 1e-12);
  CHECK(std::abs(v.entries[1].second - 2 * ib / norm) <= 1e-12);
  CHECK(tf.transform(std::vector<std::string>{"zzz"}).entries.empty());
}

TEST_CASE("k-means best of several seeds reaches the exhaustive optimum") {
  const std::vector<std::vector<double>> pts{{0, 0}, {0.2, 0.1}, {5, 5}, {5.1, 4.8}, {9, 0}, {8.7, 0.4}, {2.5, 2.4}, {4, 1}};
  const double optimum = oracle::best_partition_objective(pts, 3);
  double best = 1e300;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    KMeansOptions opt;
    opt.k = 3;
    opt.seed = seed;
    best = std::min(best, kmeans(pts, opt).objective);
  }
  CHECK(std::abs(best - optimum) <= 1e-9);
}

TEST_CASE("k-means invariants: nearest centroid, non-increasing objective") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 60; ++i) pts.push_back({n(rng) + (i % 3) * 4.0, n(rng)});
  KMeansOptions opt;
  opt.k = 3;
  opt.seed = 1;
  const auto cl = kmeans(pts, opt);
  for (std::size_t i = 1; i < cl.objective_history.size(); ++i)
    CHECK(cl.objective_history[i] <= cl.objective_history[i - 1] + 1e-12);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto d = [&](std::size_t c) {
      double s = 0;
      for (std::size_t j = 0; j < 2; ++j) s += (pts[i][j] - cl.centroids[c][j]) * (pts[i][j] - cl.centroids[c][j]);
      return s;
    };
    for (std::size_t c = 0; c < 3; ++c) CHECK(d(cl.assignments[i]) <= d(c) + 1e-12);
  }
  const auto again = kmeans(pts, opt);
  CHECK(again.assignments == cl.assignments);
  opt.k = 61;
  CHECK_THROWS_AS(kmeans(pts, opt), ValidationError);
}

TEST_CASE("label file parsing") {
  CHECK(parse_label_file({"cluster\trelation_name", "0\tdelivery", "2\trefund"}, 3, "t").size() == 2);
  CHECK_THROWS_AS(parse_label_file({"5\tx"}, 3, "t"), ValidationError);
  CHECK_THROWS_AS(parse_label_file({"0\tx", "0\ty"}, 3, "t"), ValidationError);
  CHECK_THROWS_AS(parse_label_file({"0\t"}, 3, "t"), ValidationError);
  CHECK_THROWS_AS(parse_label_file({"zero\tx"}, 3, "t"), ValidationError);
  RelationLabelFile labels{{0, "a"}, {2, "b"}};
  CHECK(parse_label_file(io::split(label_file_to_tsv(labels).substr(0, label_file_to_tsv(labels).size() - 1), '\n'), 3,
                         "t") == labels);
}

TEST_CASE("softmax regression gradient matches finite differences") {
  const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"c"}, {"a", "c", "d"}, {"d"}};
  const auto tf = TfidfModel::fit(docs);
  std::vector<SparseVector> rows;
  for (const auto& d : docs) rows.push_back(tf.transform(d));
  const std::vector<std::size_t> y{0, 1, 2, 1};
  LinearParams p{3, tf.dimension(), {}, {}};
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 0.5);
  for (std::size_t i = 0; i < 3 * tf.dimension(); ++i) p.weights.push_back(n(rng));
  for (int i = 0; i < 3; ++i) p.bias.push_back(n(rng));
  LinearParams g;
  softmax_regression_loss(p, rows, y, 0.1, &g);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    auto q = p;
    q.weights[i] += eps;
    const double up = softmax_regression_loss(q, rows, y, 0.1, nullptr);
    q.weights[i] -= 2 * eps;
    const double down = softmax_regression_loss(q, rows, y, 0.1, nullptr);
    CHECK(std::abs((up - down) / (2 * eps) - g.weights[i]) <= 1e-6);
  }
}

TEST_CASE("relation classifier learns a separable set and round-trips through JSON") {
  LabeledSet set;
  for (int i = 0; i < 20; ++i) {
    set.examples.push_back({i, {"where", "is", "parcel", std::to_string(i)}, "delivery"});
    set.examples.push_back({100 + i, {"money", "back", "please", std::to_string(i)}, "refund"});
  }
  set.relations = {"delivery", "refund"};
  std::vector<double> history;
  ClassifierConfig cfg;
  cfg.epochs = 100;
  const auto clf = train_relation_classifier(set, cfg, &history);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1] + 1e-12);
  CHECK(clf.predict(std::vector<std::string>{"where", "is", "parcel"}).first == "delivery");
  CHECK(clf.predict(std::vector<std::string>{"money", "back"}).first == "refund");
  const auto back = RelationClassifier::from_json(clf.to_json());
  const std::vector<std::string> q{"parcel", "money"};
  CHECK(back.probabilities(q) == clf.probabilities(q));
}

TEST_CASE("annotation floor flags low-confidence sentences") {
  LabeledSet set;
  set.examples = {{0, {"x"}, "a"}, {1, {"y"}, "b"}};
  set.relations = {"a", "b"};
  const auto clf = train_relation_classifier(set, ClassifierConfig{});
  Corpus corpus;
  corpus.sentences.push_back(make_sentence(0, "unrelated words"));
  const auto out = annotate_corpus(clf, Matcher(std::vector<std::vector<std::string>>{{"words"}}), corpus, 0.99);
  REQUIRE(out.size() == 1);
  CHECK(out[0].flagged);
  CHECK(out[0].mentions.size() == 1);
}

TEST_CASE("build_kg merges sentences, dedups entities and counts tuples") {
  std::vector<AnnotatedSentence> a{
      annotated(0, {"a", "b", "a"}, {{0, 1, "a"}, {1, 2, "b"}, {2, 3, "a"}}, "r1"),
      annotated(1, {"a", "b"}, {{0, 1, "a"}, {1, 2, "b"}}, "r1"),
      annotated(2, {"b", "a"}, {{0, 1, "b"}, {1, 2, "a"}}, "r1"),
      annotated(3, {"c"}, {{0, 1, "c"}}, "r2"),
      annotated(4, {"z"}, {}, "r2"),
  };
  const auto kg = build_kg(a);
  const auto st = kg_stats(kg);
  CHECK(st.tuple_count == 3);  // r1(a,b), r1(b,a), r2(c)
  CHECK(st.sentence_count == 4);
  CHECK(st.zero_entity_sentences == 1);
  CHECK(st.entity_count == 3);
  CHECK(st.relation_count == 2);
  CHECK(kg.facts.front().sentence_ids == std::vector<std::int64_t>{0, 1});

  const auto nary = export_training_set(kg, a, ExportMode::kNary);
  CHECK(nary.size() == 5);
  const auto binary = export_training_set(kg, a, ExportMode::kBinaryOnly);
  CHECK(binary.size() == 3);
  for (const auto& ex : binary) CHECK(ex.entity_starts.size() == 2);

  const auto dir = std::filesystem::temp_directory_path() / "kaid_kg_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "kg.jsonl") << kg_to_jsonl(kg);
  const auto back = kg_from_jsonl(dir / "kg.jsonl");
  CHECK(back.facts == kg.facts);
  CHECK(kg_to_jsonl(back) == kg_to_jsonl(kg));
  std::ofstream(dir / "ex.jsonl") << examples_to_jsonl(nary);
  CHECK(examples_from_jsonl(dir / "ex.jsonl").size() == nary.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_kg is order-independent") {
  std::vector<AnnotatedSentence> a{annotated(0, {"a"}, {{0, 1, "a"}}, "r"), annotated(1, {"b"}, {{0, 1, "b"}}, "q"),
                                   annotated(2, {"a"}, {{0, 1, "a"}}, "r")};
  auto b = a;
  std::reverse(b.begin(), b.end());
  CHECK(kg_to_jsonl(build_kg(a)) == kg_to_jsonl(build_kg(b)));
  a[1].relation.reset();
  CHECK_THROWS_AS(build_kg(a), ValidationError);
  CHECK_THROWS_AS(parse_export_mode("ternary"), ValidationError);
}
