#include "kaid/distillation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "kaid/checkpoint.hpp"
#include "kaid/error.hpp"
#include "kaid/io.hpp"
#include "kaid/optimizer.hpp"

namespace kaid {

using nn::Tape;
using nn::Var;

std::string origin_name(Origin origin) { return origin == Origin::kOriginal ? "D_O" : "D_A"; }

Origin parse_origin(const std::string& name) {
  if (name == "D_O") return Origin::kOriginal;
  if (name == "D_A") return Origin::kAugmented;
  throw ValidationError("unknown example origin '" + name + "' (expected D_O or D_A)");
}

std::vector<std::string> StudentConfig::errors() const {
  std::vector<std::string> errs;
  if (embedding_dim == 0) errs.push_back("student.embedding_dim must be at least 1");
  if (windows.empty()) errs.push_back("student.windows must list at least one width");
  for (auto w : windows) {
    if (w == 0) errs.push_back("student.windows entries must be positive");
  }
  if (filters == 0) errs.push_back("student.filters must be at least 1");
  if (classes < 2) errs.push_back("student.classes must be at least 2");
  if (!(lambda >= 0.0 && lambda <= 1.0)) errs.push_back("distill.lambda must lie in [0, 1]");
  if (!(init_std > 0.0)) errs.push_back("student.init_std must be positive");
  return errs;
}

void StudentConfig::validate() const {
  auto errs = errors();
  if (!errs.empty()) throw ValidationError("invalid student config: " + io::join(errs, "; "));
}

nlohmann::ordered_json StudentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["embedding_dim"] = embedding_dim;
  j["windows"] = windows;
  j["filters"] = filters;
  j["classes"] = classes;
  j["lambda"] = lambda;
  j["init_std"] = init_std;
  return j;
}

StudentConfig StudentConfig::from_json(const nlohmann::json& j) {
  StudentConfig c;
  try {
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.windows = j.at("windows").get<std::vector<std::size_t>>();
    c.filters = j.at("filters").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.lambda = j.at("lambda").get<double>();
    c.init_std = j.at("init_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed student config: ") + e.what());
  }
  return c;
}

CnnStudent::CnnStudent(const StudentConfig& config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  KAID_REQUIRE(vocab_.size() > Vocabulary::kNumSpecial, "student vocabulary is empty");
  nn::Initializer init(seed, config_.init_std);
  embedding_ = nn::Parameter("student.embedding", init.normal({vocab_.size(), config_.embedding_dim}));
  for (auto w : config_.windows) {
    convs_.emplace_back(w * config_.embedding_dim, config_.filters, "student.conv" + std::to_string(w), init);
  }
  output_ = nn::Linear(config_.filters * config_.windows.size(), config_.classes, "student.output", init);
}

Var CnnStudent::forward(Tape& tape, std::span<const std::string> tokens) const {
  const auto ids = vocab_.ids(tokens);
  Var x = nn::embedding(tape.parameter(embedding_), ids);
  const std::size_t widest = *std::max_element(config_.windows.begin(), config_.windows.end());
  std::vector<Var> pooled;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    Var windows = nn::unfold(x, config_.windows[i], widest);
    pooled.push_back(nn::max_rows(nn::relu(convs_[i].forward(tape, windows))));
  }
  return output_.forward(tape, nn::concat_cols(pooled));
}

std::vector<double> CnnStudent::logits(std::span<const std::string> tokens) const {
  Tape tape(false);
  return tape.value(forward(tape, tokens)).data;
}

std::size_t CnnStudent::predict(std::span<const std::string> tokens) const {
  const auto z = logits(tokens);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<nn::Parameter*> CnnStudent::parameters() {
  std::vector<nn::Parameter*> out{&embedding_};
  for (auto& c : convs_) c.collect(out);
  output_.collect(out);
  return out;
}

std::size_t CnnStudent::parameter_count() const {
  std::size_t n = 0;
  for (auto* p : const_cast<CnnStudent*>(this)->parameters()) n += p->value.size();
  return n;
}

std::size_t CnnStudent::parameter_count_excluding_embeddings() const {
  return parameter_count() - embedding_.value.size();
}

void CnnStudent::save(const std::filesystem::path& base, const std::vector<std::string>& classes) const {
  nlohmann::ordered_json cfg;
  cfg["student"] = config_.to_json();
  cfg["vocab"] = vocab_.tokens();
  cfg["classes"] = classes;
  auto params = const_cast<CnnStudent*>(this)->parameters();
  nn::save_checkpoint(base, cfg, params);
}

CnnStudent CnnStudent::load(const std::filesystem::path& base, std::vector<std::string>* classes) {
  const auto manifest = nn::read_manifest(base);
  CnnStudent student = [&] {
    try {
      const auto& cfg = manifest.at("config");
      if (classes) *classes = cfg.at("classes").get<std::vector<std::string>>();
      return CnnStudent(StudentConfig::from_json(cfg.at("student")),
                        Vocabulary::from_tokens(cfg.at("vocab").get<std::vector<std::string>>()), 0);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("checkpoint " + base.string() + ".json: malformed student config: " + e.what());
    }
  }();
  auto params = student.parameters();
  nn::load_parameters(base, params);
  return student;
}

namespace {
void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ValidationError("distillation weight lambda=" + io::format_double(lambda) + " lies outside [0, 1]");
}
}  // namespace

Var distill_loss(Var logits, std::span<const double> p, std::span<const double> g, double lambda) {
  check_lambda(lambda);
  const auto& z = logits.tape->value(logits);
  KAID_REQUIRE(p.size() == z.size() && g.size() == z.size(), "distill_loss: class counts differ");
  nn::validate_distribution(p);
  nn::validate_distribution(g);
  return nn::add(nn::scale(nn::cross_entropy(logits, p), lambda),
                 nn::scale(nn::cross_entropy(logits, g), 1.0 - lambda));
}

double distill_loss_value(std::span<const double> p, std::span<const double> logits, std::span<const double> g,
                          double lambda) {
  check_lambda(lambda);
  KAID_REQUIRE(p.size() == logits.size() && g.size() == logits.size(), "distill_loss: class counts differ");
  nn::validate_distribution(p);
  nn::validate_distribution(g);
  return lambda * nn::cross_entropy_value(p, logits) + (1.0 - lambda) * nn::cross_entropy_value(g, logits);
}

std::vector<DistillExample> pseudo_label(const KaidModel& teacher, std::span<const TaskExample> unlabeled,
                                         std::size_t expected_classes, const std::string& head, std::size_t threads) {
  const std::size_t C = teacher.head_classes(head).size();
  if (C != expected_classes)
    throw ValidationError("teacher head '" + head + "' has " + std::to_string(C) + " classes, expected " +
                          std::to_string(expected_classes));
  std::vector<DistillExample> out(unlabeled.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto pred = predict(teacher, unlabeled[i].input, head);
      out[i] = DistillExample{unlabeled[i].tokens, pred.label, std::move(pred.probabilities), Origin::kAugmented};
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, unlabeled.size()));
  if (threads == 1) {
    work(0, unlabeled.size());
    return out;
  }
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (unlabeled.size() + threads - 1) / threads;
  for (std::size_t b = 0; b < unlabeled.size(); b += chunk)
    jobs.push_back(std::async(std::launch::async, work, b, std::min(unlabeled.size(), b + chunk)));
  for (auto& j : jobs) j.get();
  return out;
}

DistillResult train_student(const KaidModel& teacher, std::span<const TaskExample> original,
                            std::span<const TaskExample> unlabeled, std::span<const TaskExample> evaluation,
                            const StudentConfig& config, const TrainConfig& train) {
  train.validate();
  const auto& classes = teacher.head_classes("task");
  StudentConfig cfg = config;
  if (cfg.classes == 0) cfg.classes = classes.size();
  if (cfg.classes != classes.size())
    throw ValidationError("student has " + std::to_string(cfg.classes) + " classes but the teacher has " +
                          std::to_string(classes.size()));
  cfg.validate();
  KAID_REQUIRE(!original.empty(), "distillation needs at least one original labelled example");

  std::vector<DistillExample> data;
  data.reserve(original.size() + unlabeled.size());
  for (const auto& ex : original) {
    KAID_REQUIRE(ex.label < classes.size(), "original example label outside the class map");
    data.push_back(DistillExample{ex.tokens, ex.label, predict(teacher, ex.input).probabilities, Origin::kOriginal});
  }
  for (auto& ex : pseudo_label(teacher, unlabeled, classes.size())) data.push_back(std::move(ex));

  std::vector<std::vector<std::string>> docs;
  for (const auto& d : data) docs.push_back(d.tokens);
  CnnStudent student(cfg, Vocabulary::build(docs), train.seed);

  nn::Adam opt(student.parameters(), nn::AdamOptions{.lr = train.lr});
  std::mt19937_64 rng(train.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  DistillReport report;
  std::vector<double> g(classes.size(), 0.0);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
      const std::size_t end = std::min(order.size(), start + train.batch_size);
      opt.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        std::fill(g.begin(), g.end(), 0.0);
        g[ex.label] = 1.0;
        Tape tape;
        Var loss = distill_loss(student.forward(tape, ex.tokens), ex.p, g, cfg.lambda);
        loss_sum += tape.value(loss).data[0];
        tape.backward(loss, 1.0 / static_cast<double>(end - start));
      }
      opt.step();
    }
    report.loss_history.push_back(loss_sum / static_cast<double>(order.size()));
  }

  if (!evaluation.empty()) {
    std::vector<std::size_t> gold, t_pred, s_pred;
    for (const auto& ex : evaluation) {
      gold.push_back(ex.label);
      t_pred.push_back(predict(teacher, ex.input).label);
      s_pred.push_back(student.predict(ex.tokens));
    }
    report.teacher_metric = f1_score(t_pred, gold, classes).macro_f1;
    report.student_metric = f1_score(s_pred, gold, classes).macro_f1;
    report.gap = report.teacher_metric - report.student_metric;
  }
  report.teacher_params = teacher.parameter_count();
  report.student_params = student.parameter_count_excluding_embeddings();
  report.original_examples = original.size();
  report.augmented_examples = unlabeled.size();
  return DistillResult{std::move(student), std::move(data), std::move(report)};
}

std::string distill_examples_to_jsonl(std::span<const DistillExample> data, std::span<const std::string> classes) {
  std::string out;
  for (const auto& d : data) {
    KAID_REQUIRE(d.label < classes.size(), "distillation example label outside the class map");
    nlohmann::ordered_json j;
    j["text"] = io::join(d.tokens, " ");
    j["label"] = classes[d.label];
    j["origin"] = origin_name(d.origin);
    j["p"] = d.p;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace kaid
