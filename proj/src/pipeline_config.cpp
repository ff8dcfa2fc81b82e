#include <algorithm>
#include <charconv>
#include <functional>
#include <map>

#include "kaid/error.hpp"
#include "kaid/io.hpp"
#include "kaid/pipeline.hpp"

namespace kaid {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_unsigned(const std::string& v, T& out) {
  if (v.empty() || v[0] == '-') return false;
  unsigned long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) return false;
  out = static_cast<T>(x);
  return true;
}

bool parse_real(const std::string& v, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_flag(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") return out = true, true;
  if (v == "false" || v == "0" || v == "no") return out = false, true;
  return false;
}

template <typename T, typename F>
bool parse_list(const std::string& v, std::vector<T>& out, F parse_one) {
  std::vector<T> items;
  for (auto& part : io::split(v, ',')) {
    T x{};
    if (!parse_one(trim(part), x)) return false;
    items.push_back(x);
  }
  out = std::move(items);
  return true;
}

template <typename T>
std::string list_string(const std::vector<T>& v) {
  std::vector<std::string> parts;
  for (const auto& x : v) {
    if constexpr (std::is_floating_point_v<T>) {
      parts.push_back(io::format_double(x));
    } else {
      parts.push_back(std::to_string(x));
    }
  }
  return io::join(parts, ",");
}

struct Key {
  std::function<bool(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Key unsigned_key(T PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& v) { return parse_unsigned(v, c.*field); },
          [field](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

template <typename Owner, typename T>
Key nested_unsigned(Owner PipelineConfig::*owner, T Owner::*field) {
  return {[=](PipelineConfig& c, const std::string& v) { return parse_unsigned(v, c.*owner.*field); },
          [=](const PipelineConfig& c) { return std::to_string(c.*owner.*field); }};
}

Key real_key(double PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& v) { return parse_real(v, c.*field); },
          [field](const PipelineConfig& c) { return io::format_double(c.*field); }};
}

template <typename Owner>
Key nested_real(Owner PipelineConfig::*owner, double Owner::*field) {
  return {[=](PipelineConfig& c, const std::string& v) { return parse_real(v, c.*owner.*field); },
          [=](const PipelineConfig& c) { return io::format_double(c.*owner.*field); }};
}

template <typename Owner>
Key nested_flag(Owner PipelineConfig::*owner, bool Owner::*field) {
  return {[=](PipelineConfig& c, const std::string& v) { return parse_flag(v, c.*owner.*field); },
          [=](const PipelineConfig& c) { return std::string((c.*owner.*field) ? "true" : "false"); }};
}

Key string_key(std::string PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& v) { return (c.*field = v), true; },
          [field](const PipelineConfig& c) { return c.*field; }};
}

Key path_key(std::filesystem::path PipelineConfig::*field) {
  return {[field](PipelineConfig& c, const std::string& v) { return (c.*field = v), true; },
          [field](const PipelineConfig& c) { return (c.*field).string(); }};
}

void train_keys(std::map<std::string, Key>& k, const std::string& prefix, TrainConfig PipelineConfig::*owner) {
  k[prefix + ".epochs"] = nested_unsigned(owner, &TrainConfig::epochs);
  k[prefix + ".lr"] = nested_real(owner, &TrainConfig::lr);
  k[prefix + ".batch_size"] = nested_unsigned(owner, &TrainConfig::batch_size);
}

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> k;
    k["workdir"] = path_key(&PipelineConfig::workdir);
    k["seed"] = unsigned_key(&PipelineConfig::seed);
    k["corpus.path"] = path_key(&PipelineConfig::corpus_path);
    k["corpus.format"] = string_key(&PipelineConfig::corpus_format);

    using S = SyntheticSpec;
    k["synth.num_relations"] = nested_unsigned(&PipelineConfig::synth, &S::num_relations);
    k["synth.phrases_per_relation"] = nested_unsigned(&PipelineConfig::synth, &S::phrases_per_relation);
    k["synth.sentences"] = nested_unsigned(&PipelineConfig::synth, &S::sentences);
    k["synth.noise_rate"] = nested_real(&PipelineConfig::synth, &S::noise_rate);
    k["synth.unknown_rate"] = nested_real(&PipelineConfig::synth, &S::unknown_rate);
    k["synth.seen_fraction"] = nested_real(&PipelineConfig::synth, &S::seen_fraction);
    k["synth.unseen_test"] = nested_flag(&PipelineConfig::synth, &S::unseen_test);
    k["synth.relation_template_rate"] = nested_real(&PipelineConfig::synth, &S::relation_template_rate);
    k["synth.neutral_templates"] = nested_unsigned(&PipelineConfig::synth, &S::neutral_templates);
    k["synth.train_examples"] = nested_unsigned(&PipelineConfig::synth, &S::train_examples);
    k["synth.test_examples"] = nested_unsigned(&PipelineConfig::synth, &S::test_examples);
    k["synth.matching_train"] = nested_unsigned(&PipelineConfig::synth, &S::matching_train);
    k["synth.matching_test"] = nested_unsigned(&PipelineConfig::synth, &S::matching_test);
    k["synth.unlabeled"] = nested_unsigned(&PipelineConfig::synth, &S::unlabeled);
    k["synth.noise_vocabulary"] = nested_unsigned(&PipelineConfig::synth, &S::noise_vocabulary);

    k["mine.min_frequency"] = nested_unsigned(&PipelineConfig::mine, &MinerConfig::min_frequency);
    k["mine.min_quality"] = nested_real(&PipelineConfig::mine, &MinerConfig::min_quality);
    k["mine.max_len"] = nested_unsigned(&PipelineConfig::mine, &MinerConfig::max_len);
    k["mine.trim_stopword_edges"] = nested_flag(&PipelineConfig::mine, &MinerConfig::trim_stopword_edges);

    k["cluster.k"] = unsigned_key(&PipelineConfig::cluster_k);
    k["cluster.sample"] = unsigned_key(&PipelineConfig::cluster_sample);
    k["cluster.max_iter"] = unsigned_key(&PipelineConfig::cluster_max_iter);
    k["cluster.restarts"] = unsigned_key(&PipelineConfig::cluster_restarts);
    k["cluster.representatives"] = unsigned_key(&PipelineConfig::cluster_representatives);
    k["cluster.oracle_truth"] = path_key(&PipelineConfig::cluster_oracle_truth);
    k["labels.path"] = path_key(&PipelineConfig::labels_path);

    k["classifier.epochs"] = nested_unsigned(&PipelineConfig::classifier, &ClassifierConfig::epochs);
    k["classifier.lr"] = nested_real(&PipelineConfig::classifier, &ClassifierConfig::lr);
    k["classifier.l2"] = nested_real(&PipelineConfig::classifier, &ClassifierConfig::l2);
    k["annotate.floor"] = real_key(&PipelineConfig::annotate_floor);
    k["kg.export"] = string_key(&PipelineConfig::kg_export);

    k["model.layers"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::layers);
    k["model.hidden"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::hidden);
    k["model.heads"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::heads);
    k["model.adapter_layers"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::adapter_layers);
    k["model.adapter_hidden"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::adapter_hidden);
    k["model.adapter_heads"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::adapter_heads);
    k["model.max_len"] = nested_unsigned(&PipelineConfig::model, &KaidConfig::max_len);
    k["model.use_adapter"] = nested_flag(&PipelineConfig::model, &KaidConfig::use_adapter);
    k["model.init_std"] = nested_real(&PipelineConfig::model, &KaidConfig::init_std);
    k["model.taps"] = {[](PipelineConfig& c, const std::string& v) {
                         if (trim(v).empty() || trim(v) == "auto") {
                           c.taps_set = false;
                           return true;
                         }
                         c.taps_set = true;
                         return parse_list(v, c.model.taps, parse_unsigned<std::size_t>);
                       },
                       [](const PipelineConfig& c) {
                         return c.taps_set ? list_string(c.model.taps) : std::string("auto");
                       }};

    train_keys(k, "pretrain", &PipelineConfig::pretrain);
    k["pretrain.max_examples"] = unsigned_key(&PipelineConfig::pretrain_max_examples);

    k["task.kind"] = string_key(&PipelineConfig::task_kind);
    k["task.train"] = path_key(&PipelineConfig::task_train);
    k["task.test"] = path_key(&PipelineConfig::task_test);
    k["finetune.epochs"] = nested_unsigned(&PipelineConfig::finetune, &TrainConfig::epochs);
    k["finetune.batch_size"] = nested_unsigned(&PipelineConfig::finetune, &TrainConfig::batch_size);
    k["grid.seeds"] = {[](PipelineConfig& c, const std::string& v) {
                         return parse_list(v, c.grid_seeds, parse_unsigned<std::uint64_t>);
                       },
                       [](const PipelineConfig& c) { return list_string(c.grid_seeds); }};
    k["grid.lrs"] = {[](PipelineConfig& c, const std::string& v) { return parse_list(v, c.grid_lrs, parse_real); },
                     [](const PipelineConfig& c) { return list_string(c.grid_lrs); }};
    k["grid.threads"] = unsigned_key(&PipelineConfig::grid_threads);

    k["distill.unlabeled"] = path_key(&PipelineConfig::distill_unlabeled);
    k["distill.ratio"] = real_key(&PipelineConfig::distill_ratio);
    k["distill.lambda"] = nested_real(&PipelineConfig::student, &StudentConfig::lambda);
    train_keys(k, "distill", &PipelineConfig::distill);
    k["student.embedding_dim"] = nested_unsigned(&PipelineConfig::student, &StudentConfig::embedding_dim);
    k["student.filters"] = nested_unsigned(&PipelineConfig::student, &StudentConfig::filters);
    k["student.init_std"] = nested_real(&PipelineConfig::student, &StudentConfig::init_std);
    k["student.windows"] = {[](PipelineConfig& c, const std::string& v) {
                              return parse_list(v, c.student.windows, parse_unsigned<std::size_t>);
                            },
                            [](const PipelineConfig& c) { return list_string(c.student.windows); }};

    k["bench.repetitions"] = unsigned_key(&PipelineConfig::bench_repetitions);
    k["bench.examples"] = unsigned_key(&PipelineConfig::bench_examples);
    return k;
  }();
  return keys;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto& reg = registry();
  auto it = reg.find(trim(key));
  if (it == reg.end()) {
    parse_errors_.push_back("unknown config key '" + trim(key) + "'");
    return;
  }
  if (!it->second.set(*this, trim(value)))
    parse_errors_.push_back("config key '" + it->first + "' has invalid value '" + trim(value) + "'");
}

void PipelineConfig::load_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  std::size_t line_no = 0;
  for (const auto& raw : io::read_lines(path)) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      parse_errors_.push_back(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

std::vector<std::string> PipelineConfig::errors() const {
  std::vector<std::string> errs = parse_errors_;
  auto add = [&](const std::vector<std::string>& more) { errs.insert(errs.end(), more.begin(), more.end()); };
  add(synth.errors());
  add(mine.errors());
  try {
    parse_corpus_format(corpus_format);
  } catch (const std::exception& e) {
    errs.push_back(std::string("corpus.format: ") + e.what());
  }
  if (cluster_k < 1) errs.push_back("cluster.k must be at least 1");
  if (cluster_sample < cluster_k) errs.push_back("cluster.sample must be at least cluster.k");
  if (cluster_max_iter < 1) errs.push_back("cluster.max_iter must be at least 1");
  if (cluster_restarts < 1) errs.push_back("cluster.restarts must be at least 1");
  if (classifier.epochs < 1) errs.push_back("classifier.epochs must be at least 1");
  if (!(classifier.lr > 0.0)) errs.push_back("classifier.lr must be positive");
  if (!(classifier.l2 >= 0.0)) errs.push_back("classifier.l2 must be non-negative");
  if (!(annotate_floor >= 0.0 && annotate_floor <= 1.0)) errs.push_back("annotate.floor must lie in [0, 1]");
  if (kg_export != "nary" && kg_export != "binary") errs.push_back("kg.export must be nary or binary");
  add(model_config().errors());
  for (auto e : pretrain.errors()) errs.push_back("pretrain: " + e);
  if (task_kind != "classification" && task_kind != "matching")
    errs.push_back("task.kind must be classification or matching");
  for (auto e : finetune.errors()) errs.push_back("finetune: " + e);
  if (grid_seeds.empty()) errs.push_back("grid.seeds must list at least one seed");
  if (grid_lrs.empty()) errs.push_back("grid.lrs must list at least one learning rate");
  for (double lr : grid_lrs) {
    if (!(lr > 0.0)) errs.push_back("grid.lrs entries must be positive");
  }
  if (grid_threads < 1) errs.push_back("grid.threads must be at least 1");
  if (!(distill_ratio >= 0.0)) errs.push_back("distill.ratio must be non-negative");
  StudentConfig s = student;
  s.classes = std::max<std::size_t>(s.classes, 2);
  add(s.errors());
  for (auto e : distill.errors()) errs.push_back("distill: " + e);
  if (bench_repetitions < 1) errs.push_back("bench.repetitions must be at least 1");
  if (bench_examples < 1) errs.push_back("bench.examples must be at least 1");
  return errs;
}

void PipelineConfig::validate() const {
  const auto errs = errors();
  if (errs.empty()) return;
  std::string msg = "invalid configuration (" + std::to_string(errs.size()) + " problem" +
                    (errs.size() == 1 ? "" : "s") + "):";
  for (const auto& e : errs) msg += "\n  - " + e;
  throw ValidationError(msg);
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

std::string PipelineConfig::get(const std::string& key) const {
  auto it = registry().find(key);
  if (it == registry().end()) throw ValidationError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : registry()) out += k + " = " + v.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::hash() const { return io::hex64(io::fnv1a(canonical())); }

std::filesystem::path PipelineConfig::corpus() const {
  return corpus_path.empty() ? workdir / "synth" / "corpus.txt" : corpus_path;
}

std::filesystem::path PipelineConfig::train_path() const {
  if (!task_train.empty()) return task_train;
  return workdir / "synth" / (task_kind == "matching" ? "matching_train.tsv" : "classification_train.tsv");
}

std::filesystem::path PipelineConfig::test_path() const {
  if (!task_test.empty()) return task_test;
  return workdir / "synth" / (task_kind == "matching" ? "matching_test.tsv" : "classification_test.tsv");
}

std::filesystem::path PipelineConfig::unlabeled_path() const {
  return distill_unlabeled.empty() ? workdir / "synth" / "unlabeled.txt" : distill_unlabeled;
}

std::filesystem::path PipelineConfig::labels() const {
  return labels_path.empty() ? workdir / "cluster" / "labels.tsv" : labels_path;
}

KaidConfig PipelineConfig::model_config() const {
  KaidConfig c = model;
  if (!taps_set) c.taps = KaidConfig::default_taps(c.layers, c.adapter_layers);
  return c;
}

}  // namespace kaid
