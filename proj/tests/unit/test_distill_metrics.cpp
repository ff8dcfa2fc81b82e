#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "kaid/autodiff.hpp"
#include "kaid/distillation.hpp"
#include "kaid/error.hpp"
#include "kaid/experiment.hpp"
#include "kaid/metrics.hpp"

using namespace kaid;

namespace {

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) s += (x = u(rng));
  for (auto& x : p) x /= s;
  return p;
}

Vocabulary student_vocab() {
  return Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[PLC]", "a", "b", "c", "d"});
}

}  // namespace

TEST_CASE("distillation loss degenerates to hard and soft cross entropy") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> z(4);
    for (auto& x : z) x = n(rng);
    const auto p = random_distribution(rng, 4);
    std::vector<double> g(4, 0.0);
    g[rng() % 4] = 1.0;
    CHECK(std::abs(distill_loss_value(p, z, g, 0.0) - oracle::soft_cross_entropy(g, z)) <= 1e-12);
    CHECK(std::abs(distill_loss_value(p, z, g, 1.0) - oracle::soft_cross_entropy(p, z)) <= 1e-12);
  }
  const std::vector<double> p{0.5, 0.5}, z{0.0, 1.0}, g{1.0, 0.0};
  CHECK_THROWS_AS(distill_loss_value(p, z, g, 1.5), ValidationError);
  CHECK_THROWS_AS(distill_loss_value(std::vector<double>{0.7, 0.7}, z, g, 0.5), ValidationError);
}

TEST_CASE("distillation loss is the convex combination and lies between its parts") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> z(3);
    for (auto& x : z) x = n(rng);
    const auto p = random_distribution(rng, 3);
    const auto g = random_distribution(rng, 3);
    const double lambda = u(rng);
    const double soft = oracle::soft_cross_entropy(p, z), hard = oracle::soft_cross_entropy(g, z);
    const double l = distill_loss_value(p, z, g, lambda);
    CHECK(std::abs(l - (lambda * soft + (1 - lambda) * hard)) <= 1e-12);
    CHECK(l >= std::min(soft, hard) - 1e-12);
    CHECK(l <= std::max(soft, hard) + 1e-12);
  }
}

TEST_CASE("CNN student gradient check") {
  StudentConfig cfg;
  cfg.embedding_dim = 6;
  cfg.windows = {2, 3};
  cfg.filters = 4;
  cfg.classes = 3;
  cfg.lambda = 0.7;
  CnnStudent student(cfg, student_vocab(), 4);
  const std::vector<std::string> toks{"a", "c", "b", "d", "a"};
  const std::vector<double> p{0.2, 0.5, 0.3}, g{0.0, 0.0, 1.0};
  auto params = student.parameters();
  for (auto* q : params) q->zero_grad();
  {
    nn::Tape t;
    t.backward(distill_loss(student.forward(t, toks), p, g, cfg.lambda));
  }
  const auto res = oracle::finite_difference(params, [&] {
    nn::Tape t(false);
    return t.value(distill_loss(student.forward(t, toks), p, g, cfg.lambda)).data[0];
  });
  INFO(res.worst);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("student handles sentences shorter than the widest window") {
  StudentConfig cfg;
  cfg.classes = 2;
  CnnStudent student(cfg, student_vocab(), 1);
  CHECK(student.logits(std::vector<std::string>{"a"}).size() == 2);
  CHECK(student.logits(std::vector<std::string>{}).size() == 2);
  CHECK(student.parameter_count() - student.parameter_count_excluding_embeddings() ==
        student_vocab().size() * cfg.embedding_dim);
  CHECK_THROWS_AS(CnnStudent(cfg, Vocabulary(), 1), ValidationError);
  StudentConfig bad;
  bad.lambda = -0.1;
  bad.windows = {};
  CHECK(bad.errors().size() >= 3);
}

TEST_CASE("f1_score matches hand-computed confusion values") {
  const std::vector<std::string> classes{"UNKNOWN", "a", "b"};
  SUBCASE("perfect") {
    const std::vector<std::size_t> y{0, 1, 2, 1};
    const auto r = f1_score(y, y, classes);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.micro_f1 == 1.0);
  }
  SUBCASE("one class never predicted nor present scores zero") {
    const std::vector<std::size_t> y{1, 1, 2};
    const auto r = f1_score(y, y, classes);
    CHECK(r.per_class[0].f1 == 0.0);
    CHECK(std::abs(r.macro_f1 - 2.0 / 3.0) <= 1e-15);
  }
  SUBCASE("everything predicted as one class") {
    const std::vector<std::size_t> gold{0, 1, 2}, pred{1, 1, 1};
    const auto r = f1_score(pred, gold, classes);
    // class a: p = 1/3, r = 1, f1 = 1/2; others 0
    CHECK(std::abs(r.macro_f1 - 1.0 / 6.0) <= 1e-15);
    CHECK(std::abs(r.accuracy - 1.0 / 3.0) <= 1e-15);
    CHECK(r.confusion[0][1] == 1);
  }
  SUBCASE("string labels") {
    const std::vector<std::string> gold{"a", "b", "UNKNOWN", "a"}, pred{"a", "a", "UNKNOWN", "b"};
    const auto r = f1_score(pred, gold, classes);
    const auto o = oracle::confusion_scores({1, 1, 0, 2}, {1, 2, 0, 1}, 3);
    CHECK(r.macro_f1 == o.macro);
    CHECK_THROWS_AS(f1_score(std::vector<std::string>{"zzz"}, std::vector<std::string>{"a"}, classes),
                    ValidationError);
  }
  CHECK_THROWS_AS(f1_score(std::vector<std::size_t>{}, std::vector<std::size_t>{}, classes), ValidationError);
}

TEST_CASE("f1_score agrees with the confusion oracle on random fixtures") {
  std::mt19937_64 rng(6);
  const std::vector<std::string> classes{"UNKNOWN", "a", "b", "c"};
  for (int f = 0; f < 50; ++f) {
    std::vector<std::size_t> pred, gold;
    for (int i = 0; i < 40; ++i) {
      pred.push_back(rng() % 4);
      gold.push_back(rng() % 4);
    }
    const auto r = f1_score(pred, gold, classes);
    const auto o = oracle::confusion_scores(pred, gold, 4);
    CHECK(std::abs(r.macro_f1 - o.macro) <= 1e-12);
    CHECK(std::abs(r.accuracy - o.accuracy) <= 1e-12);
    CHECK(r.micro_f1 == r.accuracy);
  }
}

TEST_CASE("auc agrees with the pairwise oracle, ties included") {
  std::mt19937_64 rng(8);
  for (int f = 0; f < 50; ++f) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      s.push_back(static_cast<double>(rng() % 7));  // many ties
      y.push_back(static_cast<int>(rng() % 2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(auc(s, y) - oracle::pairwise_auc(s, y)) <= 1e-12);
  }
  CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), ValidationError);
}

TEST_CASE("grid runs every cell, reports the mean and the first best") {
  ExperimentGrid grid{{1, 2, 3}, {0.1, 0.2}, 8};
  const auto r = run_grid(grid, [](std::size_t, std::uint64_t seed, double lr) {
    return seed == 3 ? 0.9 : lr;
  });
  REQUIRE(r.runs.size() == 6);
  CHECK(r.runs[0].seed == 1);
  CHECK(r.runs[1].lr == 0.2);
  CHECK(r.best == 4);
  CHECK(std::abs(r.mean - (0.1 + 0.2 + 0.1 + 0.2 + 0.9 + 0.9) / 6) <= 1e-15);
  const auto threaded = run_grid(grid, [](std::size_t cell, std::uint64_t, double) { return cell * 1.0; }, 3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(threaded.runs[i].metric == static_cast<double>(i));
  CHECK_THROWS_AS(run_grid(grid, [](std::size_t cell, std::uint64_t, double) -> double {
                    if (cell == 2) throw std::runtime_error("boom");
                    return 0.0;
                  }),
                  RuntimeFailure);
  CHECK_THROWS_AS(ExperimentGrid({}, {0.1}, 8).validate(), ValidationError);
}

TEST_CASE("speed benchmark reports the ratio of median per-example times") {
  volatile double sink = 0;
  const auto r = speed_benchmark(
      [&](std::size_t) {
        for (int i = 0; i < 20000; ++i) sink = sink + std::sqrt(static_cast<double>(i));
      },
      [&](std::size_t) { sink = sink + 1.0; }, 10, 3);
  CHECK(r.speedup > 1.0);
  CHECK(std::abs(r.speedup - r.teacher_per_example / r.student_per_example) <= 1e-9 * r.speedup);
  CHECK_THROWS_AS(speed_benchmark([](std::size_t) {}, [](std::size_t) {}, 0, 1), ValidationError);
}
