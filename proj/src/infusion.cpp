#include "kaid/infusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>

#include "kaid/checkpoint.hpp"
#include "kaid/error.hpp"
#include "kaid/io.hpp"
#include "kaid/optimizer.hpp"

namespace kaid {

using nn::Tape;
using nn::Var;

std::vector<std::size_t> KaidConfig::default_taps(std::size_t l1, std::size_t l2) {
  if (l2 == 0 || l1 == 0) return {};
  if (l2 == 3 && l1 >= 3) return {0, (l1 + 1) / 2 - 1, l1 - 1};
  if (l2 == 1) return {l1 - 1};
  std::vector<std::size_t> taps;
  for (std::size_t j = 0; j < l2; ++j) {
    taps.push_back(static_cast<std::size_t>(
        std::llround(static_cast<double>(j) * static_cast<double>(l1 - 1) / static_cast<double>(l2 - 1))));
  }
  return taps;
}

std::vector<std::string> KaidConfig::errors() const {
  std::vector<std::string> errs;
  if (layers == 0) errs.push_back("model.layers must be at least 1");
  if (heads == 0 || hidden == 0 || hidden % heads != 0)
    errs.push_back("model.hidden (" + std::to_string(hidden) + ") must be a positive multiple of model.heads (" +
                   std::to_string(heads) + ")");
  if (max_len < 3) errs.push_back("model.max_len must be at least 3");
  if (!(init_std > 0.0)) errs.push_back("model.init_std must be positive");
  if (use_adapter) {
    if (adapter_layers == 0) errs.push_back("model.adapter_layers must be at least 1 in adapter mode");
    if (adapter_heads == 0 || adapter_hidden == 0 || adapter_hidden % adapter_heads != 0)
      errs.push_back("model.adapter_hidden (" + std::to_string(adapter_hidden) +
                     ") must be a positive multiple of model.adapter_heads (" + std::to_string(adapter_heads) + ")");
    if (taps.size() != adapter_layers)
      errs.push_back("model.taps has " + std::to_string(taps.size()) + " entries but model.adapter_layers is " +
                     std::to_string(adapter_layers));
    for (std::size_t j = 0; j < taps.size(); ++j) {
      if (taps[j] >= layers)
        errs.push_back("model.taps entry " + std::to_string(taps[j]) + " is outside [0, " + std::to_string(layers - 1) +
                       "]");
      if (j > 0 && taps[j] <= taps[j - 1]) errs.push_back("model.taps must be strictly increasing");
    }
  }
  return errs;
}

void KaidConfig::validate() const {
  auto errs = errors();
  if (!errs.empty()) throw ValidationError("invalid model config: " + io::join(errs, "; "));
}

nlohmann::ordered_json KaidConfig::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["hidden"] = hidden;
  j["heads"] = heads;
  j["adapter_layers"] = adapter_layers;
  j["adapter_hidden"] = adapter_hidden;
  j["adapter_heads"] = adapter_heads;
  j["taps"] = taps;
  j["num_relations"] = num_relations;
  j["max_len"] = max_len;
  j["use_adapter"] = use_adapter;
  j["init_std"] = init_std;
  return j;
}

KaidConfig KaidConfig::from_json(const nlohmann::json& j) {
  KaidConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.adapter_layers = j.at("adapter_layers").get<std::size_t>();
    c.adapter_hidden = j.at("adapter_hidden").get<std::size_t>();
    c.adapter_heads = j.at("adapter_heads").get<std::size_t>();
    c.taps = j.at("taps").get<std::vector<std::size_t>>();
    c.num_relations = j.at("num_relations").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.use_adapter = j.at("use_adapter").get<bool>();
    c.init_std = j.at("init_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

void validate_encoded(const EncodedSentence& encoded) {
  KAID_REQUIRE(!encoded.entity_starts.empty(), "entity_starts is empty; the [PLC] entry at position 1 is required");
  KAID_REQUIRE(encoded.entity_starts[0] == 1, "entity_starts must begin with the [PLC] position 1");
  KAID_REQUIRE(encoded.ids.size() >= 2, "encoded sentence is shorter than [CLS] [PLC]");
  for (std::size_t i = 0; i < encoded.entity_starts.size(); ++i) {
    KAID_REQUIRE(encoded.entity_starts[i] < encoded.ids.size(), "entity start beyond sequence length");
    if (i >= 2)
      KAID_REQUIRE(encoded.entity_starts[i] > encoded.entity_starts[i - 1],
                   "entity starts after [PLC] must be strictly increasing");
  }
}

namespace {

// Copies tokens[0..keep) after `out`, pushing shifted starts that fall inside.
void append_span(EncodedSentence& out, std::span<const std::string> tokens, std::span<const std::size_t> starts,
                 std::size_t keep, const Vocabulary& vocab) {
  const std::size_t offset = out.ids.size();
  for (std::size_t i = 0; i < keep; ++i) out.ids.push_back(vocab.id(tokens[i]));
  for (auto s : starts) {
    if (s < keep) out.entity_starts.push_back(s + offset);
  }
}

std::vector<std::size_t> mention_starts(std::span<const Mention> mentions) {
  std::vector<std::size_t> starts;
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    KAID_REQUIRE(mentions[i].end > mentions[i].start, "mention with empty span");
    KAID_REQUIRE(i == 0 || mentions[i].start >= prev_end, "mentions must be sorted and non-overlapping");
    prev_end = mentions[i].end;
    starts.push_back(mentions[i].start);
  }
  return starts;
}

}  // namespace

EncodedSentence encode_input(std::span<const std::string> tokens, std::span<const std::size_t> entity_starts,
                             const Vocabulary& vocab, std::size_t max_len) {
  KAID_REQUIRE(max_len >= 3, "max_len must leave room for [CLS] [PLC] [SEP]");
  for (std::size_t i = 1; i < entity_starts.size(); ++i)
    KAID_REQUIRE(entity_starts[i] > entity_starts[i - 1], "entity starts must be strictly increasing");
  EncodedSentence out;
  out.ids = {Vocabulary::kCls, Vocabulary::kPlc};
  out.entity_starts = {1};
  append_span(out, tokens, entity_starts, std::min(tokens.size(), max_len - 3), vocab);
  out.ids.push_back(Vocabulary::kSep);
  return out;
}

EncodedSentence encode_input(std::span<const std::string> tokens, std::span<const Mention> mentions,
                             const Vocabulary& vocab, std::size_t max_len) {
  const auto starts = mention_starts(mentions);
  return encode_input(tokens, starts, vocab, max_len);
}

EncodedSentence encode_pair(std::span<const std::string> q1, std::span<const Mention> m1,
                            std::span<const std::string> q2, std::span<const Mention> m2, const Vocabulary& vocab,
                            std::size_t max_len) {
  KAID_REQUIRE(max_len >= 4, "max_len must leave room for [CLS] [PLC] [SEP] [SEP]");
  const std::size_t budget = max_len - 4;
  std::size_t keep1 = q1.size(), keep2 = q2.size();
  if (keep1 + keep2 > budget) {
    keep1 = std::min(q1.size(), std::max(budget / 2, budget - std::min(budget, q2.size())));
    keep2 = std::min(q2.size(), budget - keep1);
  }
  EncodedSentence out;
  out.ids = {Vocabulary::kCls, Vocabulary::kPlc};
  out.entity_starts = {1};
  const auto s1 = mention_starts(m1);
  const auto s2 = mention_starts(m2);
  append_span(out, q1, s1, keep1, vocab);
  out.ids.push_back(Vocabulary::kSep);
  append_span(out, q2, s2, keep2, vocab);
  out.ids.push_back(Vocabulary::kSep);
  return out;
}

KaidModel::KaidModel(const KaidConfig& config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  nn::Initializer init(seed, config_.init_std);
  const std::size_t H = config_.hidden;
  token_embedding_ = nn::Parameter("backbone.embedding.token", init.normal({vocab_.size(), H}));
  position_embedding_ = nn::Parameter("backbone.embedding.position", init.normal({config_.max_len, H}));
  embedding_norm_ = nn::LayerNorm(H, "backbone.embedding.norm");
  for (std::size_t i = 0; i < config_.layers; ++i)
    backbone_.emplace_back(H, config_.heads, "backbone.layer" + std::to_string(i), init);
  if (config_.use_adapter) {
    for (std::size_t j = 0; j < config_.adapter_layers; ++j) {
      const std::string base = "adapter.block" + std::to_string(j);
      AdapterBlock block;
      block.down = nn::Linear(H, config_.adapter_hidden, base + ".down", init);
      block.layer = nn::EncoderLayer(config_.adapter_hidden, config_.adapter_heads, base + ".layer", init);
      adapter_.push_back(std::move(block));
    }
  }
}

std::size_t KaidModel::fused_width() const {
  return config_.hidden + (config_.use_adapter ? config_.adapter_hidden : 0);
}

void KaidModel::add_head(const std::string& name, std::vector<std::string> classes, std::uint64_t seed) {
  KAID_REQUIRE(!name.empty() && name.find('.') == std::string::npos, "head name must be non-empty without dots");
  KAID_REQUIRE(classes.size() >= 2, "head '" + name + "' needs at least two classes");
  std::set<std::string> uniq(classes.begin(), classes.end());
  KAID_REQUIRE(uniq.size() == classes.size(), "head '" + name + "' has duplicate class names");
  nn::Initializer init(seed, config_.init_std);
  HeadInfo info;
  info.projection = nn::Linear(2 * fused_width(), classes.size(), "heads." + name + ".projection", init);
  info.classes = std::move(classes);
  heads_[name] = std::move(info);
}

const std::vector<std::string>& KaidModel::head_classes(const std::string& name) const {
  auto it = heads_.find(name);
  if (it == heads_.end()) throw ValidationError("model has no head named '" + name + "'");
  return it->second.classes;
}

ForwardTrace KaidModel::forward(Tape& tape, const EncodedSentence& encoded, const std::string& head) const {
  validate_encoded(encoded);
  auto hit = heads_.find(head);
  if (hit == heads_.end()) throw ValidationError("model has no head named '" + head + "'");
  const std::size_t T = encoded.ids.size();
  KAID_REQUIRE(T <= config_.max_len,
               "sequence of " + std::to_string(T) + " ids exceeds max_len " + std::to_string(config_.max_len));

  std::vector<std::size_t> positions(T);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Var tok = nn::embedding(tape.parameter(token_embedding_), encoded.ids);
  Var pos = nn::embedding(tape.parameter(position_embedding_), positions);
  Var x0 = embedding_norm_.forward(tape, nn::add(tok, pos));

  ForwardTrace trace;
  trace.backbone = nn::encoder_forward(backbone_, tape, x0);
  Var fused = trace.backbone.back();
  if (config_.use_adapter) {
    Var prev{};
    for (std::size_t j = 0; j < adapter_.size(); ++j) {
      Var down = adapter_[j].down.forward(tape, trace.backbone[config_.taps[j]]);
      Var in = j == 0 ? down : nn::add(prev, down);
      prev = adapter_[j].layer.forward(tape, in);
      trace.adapter.push_back(prev);
    }
    fused = nn::concat_cols(trace.backbone.back(), prev);
  }
  trace.fused = fused;

  std::vector<std::size_t> rows;
  if (encoded.entity_starts.size() > 1) {
    rows.assign(encoded.entity_starts.begin() + 1, encoded.entity_starts.end());
  } else {
    rows = {encoded.entity_starts[0]};
  }
  trace.pooled = nn::concat_cols(nn::row(fused, 0), nn::mean_rows(fused, rows));
  trace.logits = hit->second.projection.forward(tape, trace.pooled);
  return trace;
}

std::vector<double> KaidModel::logits(const EncodedSentence& encoded, const std::string& head) const {
  Tape tape(false);
  auto trace = forward(tape, encoded, head);
  return tape.value(trace.logits).data;
}

std::vector<nn::Parameter*> KaidModel::parameters() {
  std::vector<nn::Parameter*> out{&token_embedding_, &position_embedding_};
  embedding_norm_.collect(out);
  for (auto& l : backbone_) l.collect(out);
  for (auto& b : adapter_) {
    b.down.collect(out);
    b.layer.collect(out);
  }
  for (auto& [name, h] : heads_) h.projection.collect(out);
  return out;
}

std::vector<nn::Parameter*> KaidModel::parameters(const std::string& component) {
  std::vector<nn::Parameter*> out;
  for (auto* p : parameters()) {
    if (nn::component_of(p->name) == component) out.push_back(p);
  }
  return out;
}

std::vector<const nn::Parameter*> KaidModel::parameters(const std::string& component) const {
  std::vector<const nn::Parameter*> out;
  for (auto* p : const_cast<KaidModel*>(this)->parameters(component)) out.push_back(p);
  return out;
}

std::size_t KaidModel::parameter_count() const {
  std::size_t n = 0;
  for (auto* p : const_cast<KaidModel*>(this)->parameters()) n += p->value.size();
  return n;
}

std::size_t KaidModel::parameter_count(const std::string& component) const {
  std::size_t n = 0;
  for (auto* p : parameters(component)) n += p->value.size();
  return n;
}

void KaidModel::set_trainable(const std::function<bool(const std::string&)>& predicate) {
  for (auto* p : parameters()) p->trainable = predicate(p->name);
}

void KaidModel::save(const std::filesystem::path& base) const {
  nlohmann::ordered_json cfg;
  cfg["model"] = config_.to_json();
  cfg["vocab"] = vocab_.tokens();
  nlohmann::ordered_json heads = nlohmann::ordered_json::array();
  for (const auto& [name, h] : heads_) heads.push_back({{"name", name}, {"classes", h.classes}});
  cfg["heads"] = heads;
  cfg["adapter_pretrained"] = adapter_pretrained_;
  auto params = const_cast<KaidModel*>(this)->parameters();
  nn::save_checkpoint(base, cfg, params);
}

KaidModel KaidModel::load(const std::filesystem::path& base) {
  const auto manifest = nn::read_manifest(base);
  KaidModel model = [&] {
    try {
      const auto& cfg = manifest.at("config");
      KaidModel m(KaidConfig::from_json(cfg.at("model")),
                  Vocabulary::from_tokens(cfg.at("vocab").get<std::vector<std::string>>()), 0);
      for (const auto& h : cfg.at("heads"))
        m.add_head(h.at("name").get<std::string>(), h.at("classes").get<std::vector<std::string>>(), 0);
      m.adapter_pretrained_ = cfg.at("adapter_pretrained").get<bool>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("checkpoint " + base.string() + ".json: malformed model config: " + e.what());
    }
  }();
  auto params = model.parameters();
  nn::load_parameters(base, params);
  return model;
}

std::uint64_t component_checksum(const KaidModel& model, const std::string& component) {
  std::uint64_t h = io::fnv1a("");
  for (const auto* p : model.parameters(component)) {
    h = io::fnv1a(p->name, h);
    h = io::fnv1a(std::string_view(reinterpret_cast<const char*>(p->value.data.data()),
                                   p->value.data.size() * sizeof(double)),
                  h);
  }
  return h;
}

std::vector<std::string> TrainConfig::errors() const {
  std::vector<std::string> errs;
  if (epochs == 0) errs.push_back("train.epochs must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) errs.push_back("train.lr must be a positive finite number");
  if (batch_size == 0) errs.push_back("train.batch_size must be at least 1");
  return errs;
}

void TrainConfig::validate() const {
  auto errs = errors();
  if (!errs.empty()) throw ValidationError("invalid training config: " + io::join(errs, "; "));
}

namespace {

// Restores every parameter to trainable when training ends, even on error.
class TrainableScope {
 public:
  TrainableScope(KaidModel& model, const std::function<bool(const std::string&)>& predicate) : model_(model) {
    model_.set_trainable(predicate);
  }
  ~TrainableScope() {
    model_.set_trainable([](const std::string&) { return true; });
  }
  TrainableScope(const TrainableScope&) = delete;
  TrainableScope& operator=(const TrainableScope&) = delete;

 private:
  KaidModel& model_;
};

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

TrainReport train_loop(KaidModel& model, std::span<const EncodedSentence> inputs, std::span<const std::size_t> labels,
                       const std::string& head, const TrainConfig& config, const StepCallback& on_step) {
  const std::size_t classes = model.head_classes(head).size();
  std::vector<nn::Parameter*> trainable;
  for (auto* p : model.parameters()) {
    if (p->trainable) trainable.push_back(p);
  }
  nn::Adam opt(trainable, nn::AdamOptions{.lr = config.lr});
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  std::vector<double> target(classes, 0.0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        Tape tape;
        auto trace = model.forward(tape, inputs[idx], head);
        std::fill(target.begin(), target.end(), 0.0);
        target[labels[idx]] = 1.0;
        Var loss = nn::cross_entropy(trace.logits, target);
        loss_sum += tape.value(loss).data[0];
        const auto& z = tape.value(trace.logits).data;
        if (static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin()) == labels[idx]) ++correct;
        tape.backward(loss, scale);
      }
      opt.step();
      ++report.steps;
      if (on_step) on_step(report.steps);
    }
    report.loss_history.push_back(loss_sum / static_cast<double>(order.size()));
    report.accuracy_history.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));
  }
  return report;
}

}  // namespace

TrainReport pretrain_adapter(KaidModel& model, std::span<const RelationExample> examples,
                             std::span<const std::string> relations, const TrainConfig& config,
                             const StepCallback& on_step) {
  config.validate();
  KAID_REQUIRE(model.config().use_adapter, "pretrain_adapter needs a model with an adapter (baseline mode has none)");
  KAID_REQUIRE(!examples.empty(), "relation training export is empty");
  KAID_REQUIRE(relations.size() >= 2, "relation pretraining needs at least two relations");
  std::map<std::string, std::size_t> index;
  for (const auto& r : relations) {
    KAID_REQUIRE(index.emplace(r, index.size()).second, "duplicate relation name: " + r);
  }
  std::vector<EncodedSentence> inputs;
  std::vector<std::size_t> labels;
  inputs.reserve(examples.size());
  for (const auto& ex : examples) {
    auto it = index.find(ex.relation);
    if (it == index.end())
      throw ValidationError("export example for sentence " + std::to_string(ex.sentence_id) +
                            " has unknown relation '" + ex.relation + "'");
    inputs.push_back(encode_input(ex.tokens, std::span<const std::size_t>(ex.entity_starts), model.vocab(),
                                  model.config().max_len));
    labels.push_back(it->second);
  }
  model.add_head("relation", {relations.begin(), relations.end()}, config.seed ^ 0x52454c4154494f4eULL);
  TrainableScope scope(model, [](const std::string& name) {
    return starts_with(name, "adapter.") || starts_with(name, "heads.relation.");
  });
  auto report = train_loop(model, inputs, labels, "relation", config, on_step);
  model.mark_adapter_pretrained();
  return report;
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "matching") return TaskKind::kMatching;
  throw ValidationError("unknown task kind '" + name + "' (expected classification or matching)");
}

std::string task_kind_name(TaskKind kind) {
  return kind == TaskKind::kClassification ? "classification" : "matching";
}

void TaskDataset::validate() const {
  KAID_REQUIRE(!examples.empty(), "task dataset is empty");
  if (kind == TaskKind::kMatching) {
    KAID_REQUIRE(classes.size() == 2, "matching datasets have exactly two classes");
  } else {
    KAID_REQUIRE(classes.size() >= 2, "classification datasets need at least two classes");
    KAID_REQUIRE(std::find(classes.begin(), classes.end(), "UNKNOWN") != classes.end(),
                 "classification class map must contain UNKNOWN");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].label >= classes.size())
      throw ValidationError("example " + std::to_string(i) + " has label index " + std::to_string(examples[i].label) +
                            " outside the class map of " + std::to_string(classes.size()));
    validate_encoded(examples[i].input);
  }
}

TrainReport finetune(KaidModel& model, const TaskDataset& dataset, const TrainConfig& config,
                     const StepCallback& on_step) {
  config.validate();
  dataset.validate();
  if (model.config().use_adapter && !model.adapter_pretrained())
    throw ValidationError("adapter has not been pretrained; run pretrain-adapter first or use baseline mode");
  model.add_head("task", dataset.classes, config.seed ^ 0x5441534bULL);
  std::vector<EncodedSentence> inputs;
  std::vector<std::size_t> labels;
  for (const auto& ex : dataset.examples) {
    inputs.push_back(ex.input);
    labels.push_back(ex.label);
  }
  TrainableScope scope(model, [](const std::string& name) {
    return starts_with(name, "backbone.") || starts_with(name, "heads.task.");
  });
  return train_loop(model, inputs, labels, "task", config, on_step);
}

Prediction predict(const KaidModel& model, const EncodedSentence& encoded, const std::string& head) {
  Prediction p;
  p.probabilities = nn::softmax(model.logits(encoded, head));
  p.label = static_cast<std::size_t>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                                     p.probabilities.begin());
  return p;
}

ConfidenceStats confidence_stats(std::span<const std::vector<double>> probabilities) {
  KAID_REQUIRE(!probabilities.empty(), "confidence statistics need at least one prediction");
  std::vector<double> maxima;
  for (const auto& p : probabilities) {
    KAID_REQUIRE(!p.empty(), "empty probability vector");
    maxima.push_back(*std::max_element(p.begin(), p.end()));
  }
  ConfidenceStats s;
  s.mean_max = std::accumulate(maxima.begin(), maxima.end(), 0.0) / static_cast<double>(maxima.size());
  double var = 0.0;
  for (double m : maxima) var += (m - s.mean_max) * (m - s.mean_max);
  s.variance_max = var / static_cast<double>(maxima.size());
  return s;
}

}  // namespace kaid
