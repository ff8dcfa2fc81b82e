#include "kaid/relation_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "kaid/error.hpp"
#include "kaid/io.hpp"

namespace kaid {
namespace {

void logits_for(const LinearParams& p, const SparseVector& x, std::vector<double>& out) {
  out.assign(p.classes, 0.0);
  for (std::size_t c = 0; c < p.classes; ++c) {
    double z = p.bias[c];
    const double* w = p.weights.data() + c * p.features;
    for (const auto& [j, v] : x.entries) z += w[j] * v;
    out[c] = z;
  }
}

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

double softmax_regression_loss(const LinearParams& params, std::span<const SparseVector> rows,
                               std::span<const std::size_t> targets, double l2, LinearParams* gradient) {
  KAID_REQUIRE(rows.size() == targets.size() && !rows.empty(), "rows and targets must be non-empty and aligned");
  if (gradient) {
    gradient->classes = params.classes;
    gradient->features = params.features;
    gradient->weights.assign(params.weights.size(), 0.0);
    gradient->bias.assign(params.bias.size(), 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> prob;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    logits_for(params, rows[i], prob);
    softmax_inplace(prob);
    loss -= std::log(std::max(prob[targets[i]], 1e-300)) * inv_n;
    if (!gradient) continue;
    for (std::size_t c = 0; c < params.classes; ++c) {
      const double delta = (prob[c] - (c == targets[i] ? 1.0 : 0.0)) * inv_n;
      gradient->bias[c] += delta;
      double* g = gradient->weights.data() + c * params.features;
      for (const auto& [j, v] : rows[i].entries) g[j] += delta * v;
    }
  }
  double reg = 0.0;
  for (double w : params.weights) reg += w * w;
  loss += 0.5 * l2 * reg;
  if (gradient) {
    for (std::size_t k = 0; k < params.weights.size(); ++k) gradient->weights[k] += l2 * params.weights[k];
  }
  return loss;
}

RelationClassifier::RelationClassifier(TfidfModel tfidf, std::vector<std::string> labels, LinearParams params)
    : tfidf_(std::move(tfidf)), labels_(std::move(labels)), params_(std::move(params)) {
  KAID_REQUIRE(params_.classes == labels_.size(), "classifier label count does not match weights");
  KAID_REQUIRE(params_.features == tfidf_.dimension(), "classifier feature count does not match vocabulary");
  KAID_REQUIRE(params_.weights.size() == params_.classes * params_.features && params_.bias.size() == params_.classes,
               "classifier parameter shapes are inconsistent");
}

std::vector<double> RelationClassifier::probabilities(std::span<const std::string> tokens) const {
  std::vector<double> z;
  logits_for(params_, tfidf_.transform(tokens), z);
  softmax_inplace(z);
  return z;
}

std::size_t RelationClassifier::predict_index(std::span<const std::string> tokens) const {
  return argmax_first(probabilities(tokens));
}

std::pair<std::string, double> RelationClassifier::predict(std::span<const std::string> tokens) const {
  const auto p = probabilities(tokens);
  const auto best = argmax_first(p);
  return {labels_[best], p[best]};
}

std::string RelationClassifier::to_json() const {
  nlohmann::ordered_json j;
  j["labels"] = labels_;
  j["documents"] = tfidf_.document_count();
  j["terms"] = tfidf_.terms();
  j["idf"] = tfidf_.idf_values();
  j["weights"] = params_.weights;
  j["bias"] = params_.bias;
  return j.dump() + "\n";
}

RelationClassifier RelationClassifier::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed classifier file: ") + e.what());
  }
  auto tfidf = TfidfModel::from_parts(j.at("terms").get<std::vector<std::string>>(),
                                      j.at("idf").get<std::vector<double>>(), j.at("documents").get<std::size_t>());
  LinearParams p;
  auto labels = j.at("labels").get<std::vector<std::string>>();
  p.classes = labels.size();
  p.features = tfidf.dimension();
  p.weights = j.at("weights").get<std::vector<double>>();
  p.bias = j.at("bias").get<std::vector<double>>();
  return RelationClassifier(std::move(tfidf), std::move(labels), std::move(p));
}

RelationClassifier train_relation_classifier(const LabeledSet& data, const ClassifierConfig& config,
                                             std::vector<double>* loss_history) {
  std::map<std::string, std::size_t> label_index;
  for (const auto& ex : data.examples) label_index.emplace(ex.relation, 0);
  KAID_REQUIRE(label_index.size() >= 2, "relation classifier needs at least two distinct labels");
  std::vector<std::string> labels;
  for (auto& [name, idx] : label_index) {
    idx = labels.size();
    labels.push_back(name);
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(data.examples.size());
  for (const auto& ex : data.examples) docs.push_back(ex.tokens);
  auto tfidf = TfidfModel::fit(docs);
  std::vector<SparseVector> rows;
  std::vector<std::size_t> targets;
  rows.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    rows.push_back(tfidf.transform(docs[i]));
    targets.push_back(label_index.at(data.examples[i].relation));
  }

  // Zero init: the model is fully determined by data and config, and zero
  // epochs give the uniform distribution.
  LinearParams params;
  params.classes = labels.size();
  params.features = tfidf.dimension();
  params.weights.assign(params.classes * params.features, 0.0);
  params.bias.assign(params.classes, 0.0);

  LinearParams grad;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = softmax_regression_loss(params, rows, targets, config.l2, &grad);
    if (loss_history) loss_history->push_back(loss);
    for (std::size_t k = 0; k < params.weights.size(); ++k) params.weights[k] -= config.lr * grad.weights[k];
    for (std::size_t c = 0; c < params.classes; ++c) params.bias[c] -= config.lr * grad.bias[c];
  }
  if (loss_history) loss_history->push_back(softmax_regression_loss(params, rows, targets, config.l2, nullptr));
  return RelationClassifier(std::move(tfidf), std::move(labels), std::move(params));
}

std::pair<std::string, double> predict_relation(const RelationClassifier& classifier, const Sentence& sentence) {
  return classifier.predict(sentence.tokens);
}

std::vector<AnnotatedSentence> annotate_corpus(const RelationClassifier& classifier, const Matcher& matcher,
                                               const Corpus& corpus, double confidence_floor) {
  std::vector<AnnotatedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    AnnotatedSentence a;
    a.sentence = s;
    a.mentions = matcher.find_mentions(s);
    auto [rel, conf] = classifier.predict(s.tokens);
    a.relation = std::move(rel);
    a.relation_confidence = conf;
    a.flagged = conf < confidence_floor;
    out.push_back(std::move(a));
  }
  return out;
}

std::string annotations_to_jsonl(std::span<const AnnotatedSentence> annotated) {
  std::string out;
  for (const auto& a : annotated) {
    nlohmann::ordered_json j;
    j["id"] = a.sentence.id;
    j["tokens"] = a.sentence.tokens;
    auto mentions = nlohmann::ordered_json::array();
    for (const auto& m : a.mentions) {
      nlohmann::ordered_json mj;
      mj["start"] = m.start;
      mj["end"] = m.end;
      mj["phrase"] = m.phrase;
      mentions.push_back(std::move(mj));
    }
    j["mentions"] = std::move(mentions);
    j["relation"] = a.relation ? nlohmann::ordered_json(*a.relation) : nlohmann::ordered_json(nullptr);
    j["confidence"] = a.relation_confidence ? nlohmann::ordered_json(*a.relation_confidence)
                                            : nlohmann::ordered_json(nullptr);
    j["flagged"] = a.flagged;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedSentence> annotations_from_jsonl(const std::filesystem::path& path) {
  std::vector<AnnotatedSentence> out;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto where = path.string() + ":" + std::to_string(i + 1);
    try {
      auto j = nlohmann::json::parse(lines[i]);
      AnnotatedSentence a;
      a.sentence.id = j.at("id").get<std::int64_t>();
      a.sentence.tokens = j.at("tokens").get<std::vector<std::string>>();
      a.sentence.raw = io::join(a.sentence.tokens, " ");
      for (const auto& m : j.at("mentions")) {
        a.mentions.push_back(
            Mention{m.at("start").get<std::size_t>(), m.at("end").get<std::size_t>(), m.at("phrase").get<std::string>()});
      }
      if (j.contains("relation") && !j["relation"].is_null()) a.relation = j["relation"].get<std::string>();
      if (j.contains("confidence") && !j["confidence"].is_null()) a.relation_confidence = j["confidence"].get<double>();
      a.flagged = j.value("flagged", false);
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": malformed annotation record: " + e.what());
    }
  }
  return out;
}

}  // namespace kaid
