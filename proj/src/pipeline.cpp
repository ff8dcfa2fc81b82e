#include "kaid/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <tuple>

#include <json.hpp>

#include "kaid/cluster_labeler.hpp"
#include "kaid/datasets.hpp"
#include "kaid/error.hpp"
#include "kaid/experiment.hpp"
#include "kaid/io.hpp"
#include "kaid/metrics.hpp"

namespace kaid {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path))
    throw ValidationError("missing " + path.string() + "; run the '" + stage + "' stage first");
}

// Records what a stage consumed and produced. Only this file carries wall-clock
// data; everything else in a stage directory is a pure function of its inputs.
void write_manifest(const fs::path& dir, const std::string& stage, const PipelineConfig& config,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  ojson m;
  m["stage"] = stage;
  m["config_hash"] = config.hash();
  m["seed"] = config.seed;
  ojson in = ojson::object();
  for (const auto& p : inputs) in[p.string()] = io::hash_file(p);
  m["inputs"] = in;
  ojson out = ojson::object();
  for (const auto& p : outputs) {
    if (fs::is_regular_file(p)) out[p.filename().string()] = io::hash_file(p);
  }
  m["outputs"] = out;
  m["timestamp"] = timestamp();
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const ojson& j) { io::write_file(path, j.dump(2) + "\n"); }

ojson rounded(double x) { return nlohmann::ordered_json::parse(io::format_fixed(x, 6)); }

ojson rounded(const std::vector<double>& xs) {
  ojson a = ojson::array();
  for (double x : xs) a.push_back(rounded(x));
  return a;
}

std::uint64_t derive_seed(std::uint64_t global, std::uint64_t local) {
  return global * 0x9E3779B97F4A7C15ULL + local;
}

Corpus load_input_corpus(const PipelineConfig& c) {
  if (c.corpus_path.empty()) require(c.corpus(), "synth");
  return load_corpus(c.corpus(), parse_corpus_format(c.corpus_format));
}

std::vector<fs::path> corpus_inputs(const PipelineConfig& c) { return {c.corpus()}; }

Vocabulary corpus_vocab(const Corpus& corpus) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& s : corpus.sentences) docs.push_back(s.tokens);
  return Vocabulary::build(docs);
}

Matcher load_matcher(const PipelineConfig& c) {
  const auto path = c.workdir / "mine" / "phrases.tsv";
  require(path, "mine");
  return build_matcher(lexicon_from_tsv(path));
}

TaskKind task_kind(const PipelineConfig& c) { return parse_task_kind(c.task_kind); }

void require_task_file(const fs::path& p, bool explicit_path) {
  if (explicit_path) {
    if (!fs::exists(p)) throw ValidationError("task dataset not found: " + p.string());
  } else {
    require(p, "synth");
  }
}

TaskDataset load_task(const PipelineConfig& c, const fs::path& path, bool explicit_path, const Vocabulary& vocab,
                      const Matcher& matcher, const std::vector<std::string>& classes = {}) {
  require_task_file(path, explicit_path);
  const std::size_t max_len = c.model_config().max_len;
  if (task_kind(c) == TaskKind::kMatching) return to_task_dataset(matching_from_tsv(path), vocab, matcher, max_len);
  return to_task_dataset(classification_from_tsv(path, classes), vocab, matcher, max_len);
}

// Unlabeled text for distillation. Matching pairs consecutive lines.
std::vector<TaskExample> load_unlabeled(const PipelineConfig& c, const Vocabulary& vocab, const Matcher& matcher,
                                        const std::vector<std::string>& classes, std::size_t limit) {
  const auto path = c.unlabeled_path();
  if (c.distill_unlabeled.empty()) {
    require(path, "synth");
  } else if (!fs::exists(path)) {
    throw ValidationError("unlabeled text not found: " + path.string());
  }
  std::vector<std::string> lines;
  for (auto& l : io::read_lines(path)) {
    if (l.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(l);
  }
  const std::size_t max_len = c.model_config().max_len;
  if (task_kind(c) == TaskKind::kMatching) {
    MatchingDataset pairs;
    for (std::size_t i = 0; i + 1 < lines.size() && pairs.examples.size() < limit; i += 2)
      pairs.examples.push_back({lines[i], lines[i + 1], 0});
    if (pairs.examples.empty()) return {};
    return to_task_dataset(pairs, vocab, matcher, max_len).examples;
  }
  ClassificationDataset data;
  data.classes = classes;
  for (std::size_t i = 0; i < lines.size() && data.examples.size() < limit; ++i)
    data.examples.push_back({lines[i], kUnknownLabel});
  if (data.examples.empty()) return {};
  return to_task_dataset(data, vocab, matcher, max_len).examples;
}

struct Evaluation {
  F1Report f1;
  std::optional<double> auc;
  ConfidenceStats confidence;
};

template <typename Probs>
Evaluation evaluate(const TaskDataset& test, Probs&& probabilities) {
  std::vector<std::size_t> pred, gold;
  std::vector<std::vector<double>> probs;
  for (const auto& ex : test.examples) {
    auto p = probabilities(ex);
    pred.push_back(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
    gold.push_back(ex.label);
    probs.push_back(std::move(p));
  }
  Evaluation e;
  e.f1 = f1_score(pred, gold, test.classes);
  e.confidence = confidence_stats(probs);
  if (test.kind == TaskKind::kMatching) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores.push_back(probs[i][1]);
      labels.push_back(static_cast<int>(gold[i]));
    }
    try {
      e.auc = auc(scores, labels);
    } catch (const ValidationError&) {
      e.auc.reset();  // single-class test split
    }
  }
  return e;
}

double headline(const Evaluation& e, TaskKind kind) {
  return kind == TaskKind::kMatching && e.auc ? *e.auc : e.f1.macro_f1;
}

ojson evaluation_json(const Evaluation& e) {
  ojson j;
  j["macro_f1"] = rounded(e.f1.macro_f1);
  j["micro_f1"] = rounded(e.f1.micro_f1);
  j["accuracy"] = rounded(e.f1.accuracy);
  if (e.auc) j["auc"] = rounded(*e.auc);
  ojson per = ojson::object();
  for (std::size_t i = 0; i < e.f1.classes.size(); ++i) {
    const auto& s = e.f1.per_class[i];
    per[e.f1.classes[i]] = {{"precision", rounded(s.precision)},
                            {"recall", rounded(s.recall)},
                            {"f1", rounded(s.f1)},
                            {"support", s.support}};
  }
  j["per_class"] = per;
  j["confidence"] = {{"mean_max", rounded(e.confidence.mean_max)},
                     {"variance_max", rounded(e.confidence.variance_max)}};
  return j;
}

// ---------------------------------------------------------------- stages

std::string stage_synth(const PipelineConfig& c) {
  SyntheticSpec spec = c.synth;
  spec.seed = c.seed;
  const auto domain = generate_synthetic_domain(spec);
  const auto dir = c.workdir / "synth";
  write_synthetic_domain(domain, dir);
  std::vector<fs::path> outputs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() != "manifest.json") outputs.push_back(e.path());
  }
  std::sort(outputs.begin(), outputs.end());
  write_manifest(dir, "synth", c, {}, outputs);
  return "synth: " + std::to_string(domain.corpus.size()) + " sentences, " + std::to_string(domain.phrases.size()) +
         " planted phrases -> " + dir.string();
}

std::string stage_mine(const PipelineConfig& c) {
  const auto corpus = load_input_corpus(c);
  const auto lexicon = mine_phrases(corpus, c.mine);
  const auto dir = c.workdir / "mine";
  io::write_file(dir / "phrases.tsv", lexicon_to_tsv(lexicon));
  write_manifest(dir, "mine", c, corpus_inputs(c), {dir / "phrases.tsv"});
  return "mine: " + std::to_string(lexicon.size()) + " phrases -> " + (dir / "phrases.tsv").string();
}

struct SampleClustering {
  Corpus sample;
  Clustering clustering;
};

SampleClustering cluster_sample(const PipelineConfig& c, const Corpus& corpus, std::vector<SparseVector>* rows_out,
                                TfidfModel* tfidf_out) {
  if (corpus.size() < c.cluster_k)
    throw ValidationError("corpus has " + std::to_string(corpus.size()) + " sentences, fewer than cluster.k");
  SampleClustering sc;
  sc.sample = sample_subset(corpus, std::min(c.cluster_sample, corpus.size()), derive_seed(c.seed, 1));
  auto tfidf = TfidfModel::fit(sc.sample);
  std::vector<SparseVector> rows;
  rows.reserve(sc.sample.size());
  for (const auto& s : sc.sample.sentences) rows.push_back(tfidf.transform(s.tokens));
  std::optional<Clustering> best;
  for (std::size_t r = 0; r < c.cluster_restarts; ++r) {
    KMeansOptions opt;
    opt.k = c.cluster_k;
    opt.max_iter = c.cluster_max_iter;
    opt.seed = derive_seed(c.seed, 100 + r);
    auto cl = kmeans(rows, tfidf.dimension(), opt);
    if (!best || cl.objective < best->objective) best = std::move(cl);
  }
  sc.clustering = std::move(*best);
  if (rows_out) *rows_out = std::move(rows);
  if (tfidf_out) *tfidf_out = std::move(tfidf);
  return sc;
}

std::string stage_cluster(const PipelineConfig& c) {
  const auto corpus = load_input_corpus(c);
  std::vector<SparseVector> rows;
  auto sc = cluster_sample(c, corpus, &rows, nullptr);
  const auto dir = c.workdir / "cluster";

  std::string assignments = "sentence_id\tcluster\n";
  for (std::size_t i = 0; i < sc.sample.size(); ++i)
    assignments += std::to_string(sc.sample.sentences[i].id) + "\t" + std::to_string(sc.clustering.assignments[i]) + "\n";
  io::write_file(dir / "clusters.tsv", assignments);

  const auto reports = cluster_representatives(sc.clustering, rows, sc.sample, c.cluster_representatives);
  io::write_file(dir / "representatives.tsv", representatives_to_tsv(reports, sc.sample));

  // Operators fill in the second column and save it as labels.tsv.
  std::string tmpl = "cluster\trelation_name\n";
  for (const auto& r : reports) tmpl += std::to_string(r.cluster) + "\t\n";
  io::write_file(dir / "labels_template.tsv", tmpl);

  std::vector<fs::path> inputs = corpus_inputs(c);
  std::vector<fs::path> outputs{dir / "clusters.tsv", dir / "representatives.tsv", dir / "labels_template.tsv"};
  std::string note;
  if (!c.cluster_oracle_truth.empty()) {
    // relative paths are taken from the workdir
    const auto truth = c.cluster_oracle_truth.is_relative() ? c.workdir / c.cluster_oracle_truth : c.cluster_oracle_truth;
    if (!fs::exists(truth)) throw ValidationError("cluster.oracle_truth not found: " + truth.string());
    const auto labels = oracle_cluster_labels(sc.clustering, sc.sample, read_truth_relations(truth));
    io::write_file(dir / "labels.tsv", label_file_to_tsv(labels));
    inputs.push_back(truth);
    outputs.push_back(dir / "labels.tsv");
    note = ", oracle labels written";
  }
  write_manifest(dir, "cluster", c, inputs, outputs);
  return "cluster: " + std::to_string(sc.sample.size()) + " sentences in " + std::to_string(sc.clustering.k) +
         " clusters (objective " + io::format_fixed(sc.clustering.objective, 4) + ")" + note;
}

std::string stage_label_apply(const PipelineConfig& c) {
  const auto clusters_path = c.workdir / "cluster" / "clusters.tsv";
  require(clusters_path, "cluster");
  const auto labels_path = c.labels();
  if (!fs::exists(labels_path)) {
    throw ValidationError("missing label file " + labels_path.string() + "; name the clusters in " +
                          (c.workdir / "cluster" / "labels_template.tsv").string() +
                          " (or set cluster.oracle_truth and rerun 'cluster'), then save it there or set labels.path");
  }
  const auto corpus = load_input_corpus(c);
  std::map<std::int64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_id[corpus.sentences[i].id] = i;

  Corpus sample;
  Clustering clustering;
  clustering.k = c.cluster_k;
  const auto lines = io::read_lines(clusters_path);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto f = io::split(lines[n], '\t');
    const auto where = clusters_path.string() + ":" + std::to_string(n + 1);
    KAID_REQUIRE(f.size() == 2, where + ": expected sentence_id and cluster");
    std::int64_t id = 0;
    std::size_t cl = 0;
    try {
      id = std::stoll(f[0]);
      cl = std::stoul(f[1]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": malformed row");
    }
    auto it = by_id.find(id);
    KAID_REQUIRE(it != by_id.end(), where + ": sentence " + f[0] + " is not in the corpus; rerun 'cluster'");
    KAID_REQUIRE(cl < c.cluster_k, where + ": cluster id outside [0, cluster.k); rerun 'cluster'");
    sample.sentences.push_back(corpus.sentences[it->second]);
    clustering.assignments.push_back(cl);
  }
  const auto labels = parse_label_file(labels_path, c.cluster_k);
  const auto labeled = apply_labels(clustering, labels, sample);
  if (labeled.relations.size() < 2)
    throw ValidationError("label file names fewer than two distinct relations; a classifier needs at least two");

  std::vector<double> history;
  const auto classifier = train_relation_classifier(labeled, c.classifier, &history);
  const auto dir = c.workdir / "label";
  std::string tsv = "sentence_id\trelation\ttext\n";
  for (const auto& ex : labeled.examples) {
    std::string text;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) text += (i ? " " : "") + ex.tokens[i];
    tsv += std::to_string(ex.sentence_id) + "\t" + ex.relation + "\t" + text + "\n";
  }
  io::write_file(dir / "labeled.tsv", tsv);
  io::write_file(dir / "classifier.json", classifier.to_json());
  write_manifest(dir, "label-apply", c, {c.corpus(), clusters_path, labels_path},
                 {dir / "labeled.tsv", dir / "classifier.json"});
  return "label-apply: " + std::to_string(labeled.examples.size()) + " labeled sentences, " +
         std::to_string(labeled.relations.size()) + " relations, final loss " +
         io::format_fixed(history.empty() ? 0.0 : history.back(), 4);
}

std::string stage_annotate(const PipelineConfig& c) {
  const auto clf_path = c.workdir / "label" / "classifier.json";
  require(clf_path, "label-apply");
  const auto matcher = load_matcher(c);
  const auto corpus = load_input_corpus(c);
  const auto classifier = RelationClassifier::from_json(io::read_file(clf_path));
  const auto annotated = annotate_corpus(classifier, matcher, corpus, c.annotate_floor);
  const auto dir = c.workdir / "annotate";
  io::write_file(dir / "annotations.jsonl", annotations_to_jsonl(annotated));
  std::size_t flagged = 0, mentions = 0;
  for (const auto& a : annotated) {
    flagged += a.flagged;
    mentions += a.mentions.size();
  }
  write_manifest(dir, "annotate", c, {c.corpus(), c.workdir / "mine" / "phrases.tsv", clf_path},
                 {dir / "annotations.jsonl"});
  return "annotate: " + std::to_string(annotated.size()) + " sentences, " + std::to_string(mentions) +
         " mentions, " + std::to_string(flagged) + " flagged";
}

std::string stage_build_kg(const PipelineConfig& c) {
  const auto ann_path = c.workdir / "annotate" / "annotations.jsonl";
  require(ann_path, "annotate");
  const auto annotated = annotations_from_jsonl(ann_path);
  const auto kg = build_kg(annotated, "annotate/annotations.jsonl " + io::hash_file(ann_path));
  const auto stats = kg_stats(kg);
  const auto mode = parse_export_mode(c.kg_export);
  const auto examples = export_training_set(kg, annotated, mode);
  const auto dir = c.workdir / "kg";
  io::write_file(dir / "kg.jsonl", kg_to_jsonl(kg));
  ojson s;
  s["entities"] = stats.entity_count;
  s["relations"] = stats.relation_count;
  s["tuples"] = stats.tuple_count;
  s["sentences"] = stats.sentence_count;
  s["zero_entity_sentences"] = stats.zero_entity_sentences;
  s["export_mode"] = std::string(export_mode_name(mode));
  s["export_examples"] = examples.size();
  write_json(dir / "stats.json", s);
  io::write_file(dir / "export.jsonl", examples_to_jsonl(examples));
  write_manifest(dir, "build-kg", c, {ann_path}, {dir / "kg.jsonl", dir / "stats.json", dir / "export.jsonl"});
  return "build-kg: " + std::to_string(stats.entity_count) + " entities, " + std::to_string(stats.tuple_count) +
         " tuples, " + std::to_string(examples.size()) + " export examples";
}

std::string stage_pretrain(const PipelineConfig& c) {
  const auto mc = c.model_config();
  if (!mc.use_adapter)
    throw ValidationError("pretrain-adapter needs model.use_adapter = true; baseline runs go straight to finetune");
  const auto export_path = c.workdir / "kg" / "export.jsonl";
  require(export_path, "build-kg");
  auto examples = examples_from_jsonl(export_path);
  if (examples.empty()) throw ValidationError("KG export is empty; nothing to pretrain on");
  if (examples.size() > c.pretrain_max_examples) {
    std::mt19937_64 rng(derive_seed(c.seed, 2));
    std::shuffle(examples.begin(), examples.end(), rng);
    examples.resize(c.pretrain_max_examples);
    std::sort(examples.begin(), examples.end(), [](const auto& a, const auto& b) {
      return std::tie(a.sentence_id, a.relation) < std::tie(b.sentence_id, b.relation);
    });
  }
  std::set<std::string> names;
  for (const auto& e : examples) names.insert(e.relation);
  const std::vector<std::string> relations(names.begin(), names.end());

  const auto corpus = load_input_corpus(c);
  auto model_cfg = mc;
  model_cfg.num_relations = relations.size();
  KaidModel model(model_cfg, corpus_vocab(corpus), c.seed);
  TrainConfig tc = c.pretrain;
  tc.seed = derive_seed(c.seed, 3);
  const auto report = pretrain_adapter(model, examples, relations, tc);

  const auto dir = c.workdir / "pretrain";
  model.save(dir / "model");
  ojson r;
  r["examples"] = examples.size();
  r["relations"] = relations;
  r["parameters"] = model.parameter_count();
  r["loss_history"] = rounded(report.loss_history);
  r["accuracy_history"] = rounded(report.accuracy_history);
  r["steps"] = report.steps;
  write_json(dir / "report.json", r);
  write_manifest(dir, "pretrain-adapter", c, {export_path, c.corpus()},
                 {dir / "model.json", dir / "model.bin", dir / "report.json"});
  return "pretrain-adapter: " + std::to_string(examples.size()) + " examples, final accuracy " +
         io::format_fixed(report.accuracy_history.empty() ? 0.0 : report.accuracy_history.back(), 4);
}

KaidModel base_model(const PipelineConfig& c) {
  const auto mc = c.model_config();
  if (mc.use_adapter) {
    const auto path = c.workdir / "pretrain" / "model.json";
    if (!fs::exists(path))
      throw ValidationError("adapter mode needs a pretrained adapter (" + path.string() +
                            "); run the 'pretrain-adapter' stage first or set model.use_adapter = false");
    auto m = KaidModel::load(c.workdir / "pretrain" / "model");
    if (!m.adapter_pretrained())
      throw ValidationError("checkpoint " + path.string() + " has no pretrained adapter; rerun 'pretrain-adapter'");
    return m;
  }
  // Same initialisation seed as the adapter run, so both modes start from one backbone.
  return KaidModel(mc, corpus_vocab(load_input_corpus(c)), c.seed);
}

std::string stage_finetune(const PipelineConfig& c) {
  const KaidModel base = base_model(c);
  const auto matcher = load_matcher(c);
  const auto train = load_task(c, c.train_path(), !c.task_train.empty(), base.vocab(), matcher);
  const auto test = load_task(c, c.test_path(), !c.task_test.empty(), base.vocab(), matcher, train.classes);
  const auto kind = task_kind(c);

  ExperimentGrid grid{c.grid_seeds, c.grid_lrs, c.finetune.batch_size};
  std::vector<std::optional<KaidModel>> models(grid.size());
  std::vector<Evaluation> evals(grid.size());
  std::vector<TrainReport> reports(grid.size());
  const auto result = run_grid(
      grid,
      [&](std::size_t cell, std::uint64_t seed, double lr) {
        KaidModel m = base;
        TrainConfig tc = c.finetune;
        tc.lr = lr;
        tc.seed = derive_seed(c.seed, seed);
        reports[cell] = finetune(m, train, tc);
        evals[cell] = evaluate(test, [&](const TaskExample& ex) { return predict(m, ex.input).probabilities; });
        models[cell] = std::move(m);
        return headline(evals[cell], kind);
      },
      c.grid_threads);

  const auto dir = c.workdir / "finetune";
  models[result.runs[result.best].cell]->save(dir / "teacher");
  ojson r;
  r["task"] = task_kind_name(kind);
  r["mode"] = c.model_config().use_adapter ? "adapter" : "baseline";
  r["metric"] = kind == TaskKind::kMatching ? "auc" : "macro_f1";
  r["classes"] = train.classes;
  r["train_examples"] = train.examples.size();
  r["test_examples"] = test.examples.size();
  ojson runs = ojson::array();
  for (const auto& run : result.runs) {
    ojson j;
    j["seed"] = run.seed;
    j["lr"] = run.lr;
    j["metric"] = rounded(run.metric);
    j["test"] = evaluation_json(evals[run.cell]);
    j["loss_history"] = rounded(reports[run.cell].loss_history);
    runs.push_back(j);
  }
  r["runs"] = runs;
  r["mean"] = rounded(result.mean);
  r["best"] = result.best;
  r["teacher_parameters"] = base.parameter_count();
  write_json(dir / "report.json", r);
  std::vector<fs::path> inputs{c.train_path(), c.test_path(), c.workdir / "mine" / "phrases.tsv"};
  if (c.model_config().use_adapter) inputs.push_back(c.workdir / "pretrain" / "model.bin");
  write_manifest(dir, "finetune", c, inputs, {dir / "teacher.json", dir / "teacher.bin", dir / "report.json"});
  return "finetune: " + std::string(r["mode"].get<std::string>()) + " mean " + r["metric"].get<std::string>() + " " +
         io::format_fixed(result.mean, 4) + " over " + std::to_string(result.runs.size()) + " runs, best " +
         io::format_fixed(result.runs[result.best].metric, 4);
}

KaidModel load_teacher(const PipelineConfig& c) {
  require(c.workdir / "finetune" / "teacher.json", "finetune");
  return KaidModel::load(c.workdir / "finetune" / "teacher");
}

std::string stage_distill(const PipelineConfig& c) {
  const auto teacher = load_teacher(c);
  const auto matcher = load_matcher(c);
  const auto& classes = teacher.head_classes("task");
  const auto train = load_task(c, c.train_path(), !c.task_train.empty(), teacher.vocab(), matcher, classes);
  const auto test = load_task(c, c.test_path(), !c.task_test.empty(), teacher.vocab(), matcher, classes);
  const auto limit = static_cast<std::size_t>(c.distill_ratio * static_cast<double>(train.examples.size()) + 0.5);
  const auto unlabeled = load_unlabeled(c, teacher.vocab(), matcher, classes, limit);

  StudentConfig sc = c.student;
  sc.classes = classes.size();
  TrainConfig tc = c.distill;
  tc.seed = derive_seed(c.seed, 4);
  const auto result = train_student(teacher, train.examples, unlabeled, test.examples, sc, tc);

  const auto dir = c.workdir / "distill";
  result.student.save(dir / "student", classes);
  io::write_file(dir / "augmented.jsonl", distill_examples_to_jsonl(result.data, classes));
  const auto& rep = result.report;
  ojson r;
  r["teacher_macro_f1"] = rounded(rep.teacher_metric);
  r["student_macro_f1"] = rounded(rep.student_metric);
  r["gap"] = rounded(rep.gap);
  r["teacher_parameters"] = rep.teacher_params;
  r["student_parameters_excluding_embeddings"] = rep.student_params;
  r["original_examples"] = rep.original_examples;
  r["augmented_examples"] = rep.augmented_examples;
  r["lambda"] = sc.lambda;
  r["loss_history"] = rounded(rep.loss_history);
  write_json(dir / "report.json", r);
  write_manifest(dir, "distill", c,
                 {c.workdir / "finetune" / "teacher.bin", c.train_path(), c.test_path(), c.unlabeled_path()},
                 {dir / "student.json", dir / "student.bin", dir / "augmented.jsonl", dir / "report.json"});
  return "distill: teacher " + io::format_fixed(rep.teacher_metric, 4) + " student " +
         io::format_fixed(rep.student_metric, 4) + " (" + std::to_string(rep.original_examples) + " D_O + " +
         std::to_string(rep.augmented_examples) + " D_A)";
}

struct TrainedPair {
  KaidModel teacher;
  CnnStudent student;
  TaskDataset test;
};

TrainedPair load_pair(const PipelineConfig& c) {
  auto teacher = load_teacher(c);
  require(c.workdir / "distill" / "student.json", "distill");
  std::vector<std::string> student_classes;
  auto student = CnnStudent::load(c.workdir / "distill" / "student", &student_classes);
  const auto& classes = teacher.head_classes("task");
  if (student_classes != classes)
    throw ValidationError("student and teacher class maps differ; rerun 'distill'");
  const auto matcher = load_matcher(c);
  auto test = load_task(c, c.test_path(), !c.task_test.empty(), teacher.vocab(), matcher, classes);
  return {std::move(teacher), std::move(student), std::move(test)};
}

std::string stage_eval(const PipelineConfig& c) {
  auto pair = load_pair(c);
  const auto kind = task_kind(c);
  const auto te = evaluate(pair.test, [&](const TaskExample& ex) { return predict(pair.teacher, ex.input).probabilities; });
  const auto se = evaluate(pair.test, [&](const TaskExample& ex) {
    auto z = pair.student.logits(ex.tokens);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) sum += (v = std::exp(v - m));
    for (auto& v : z) v /= sum;
    return z;
  });
  ojson r;
  r["task"] = task_kind_name(kind);
  r["mode"] = pair.teacher.config().use_adapter ? "adapter" : "baseline";
  r["test_examples"] = pair.test.examples.size();
  r["teacher"] = evaluation_json(te);
  r["student"] = evaluation_json(se);
  r["teacher_parameters"] = pair.teacher.parameter_count();
  r["student_parameters_excluding_embeddings"] = pair.student.parameter_count_excluding_embeddings();
  r["gap_macro_f1"] = rounded(te.f1.macro_f1 - se.f1.macro_f1);

  const auto ft_path = c.workdir / "finetune" / "report.json";
  if (fs::exists(ft_path)) {
    const auto ft = nlohmann::json::parse(io::read_file(ft_path));
    r["grid_mean"] = ft.at("mean");
    r["grid_metric"] = ft.at("metric");
  }
  const auto kg_path = c.workdir / "kg" / "stats.json";
  if (fs::exists(kg_path)) r["kg"] = ojson::parse(io::read_file(kg_path));

  const auto dir = c.workdir / "eval";
  write_json(dir / "report.json", r);
  write_manifest(dir, "eval", c,
                 {c.workdir / "finetune" / "teacher.bin", c.workdir / "distill" / "student.bin", c.test_path()},
                 {dir / "report.json"});
  return "eval: teacher " + io::format_fixed(headline(te, kind), 4) + " student " +
         io::format_fixed(headline(se, kind), 4) + " (" + std::string(r["teacher"].contains("auc") ? "auc" : "macro_f1") +
         ") -> " + (dir / "report.json").string();
}

std::string stage_bench(const PipelineConfig& c) {
  auto pair = load_pair(c);
  const std::size_t n = std::min(c.bench_examples, pair.test.examples.size());
  if (n == 0) throw ValidationError("bench needs at least one test example");
  const auto& ex = pair.test.examples;
  const auto speed = speed_benchmark([&](std::size_t i) { (void)pair.teacher.logits(ex[i].input, "task"); },
                                     [&](std::size_t i) { (void)pair.student.logits(ex[i].tokens); }, n,
                                     c.bench_repetitions);
  const double tp = static_cast<double>(pair.teacher.parameter_count());
  const double sp = static_cast<double>(pair.student.parameter_count_excluding_embeddings());
  ojson r;
  r["examples"] = speed.examples;
  r["repetitions"] = speed.repetitions;
  r["teacher_seconds_per_example"] = speed.teacher_per_example;
  r["student_seconds_per_example"] = speed.student_per_example;
  r["speedup"] = speed.speedup;
  r["teacher_parameters"] = pair.teacher.parameter_count();
  r["student_parameters_excluding_embeddings"] = pair.student.parameter_count_excluding_embeddings();
  r["parameter_ratio"] = sp / tp;
  const auto dir = c.workdir / "bench";
  write_json(dir / "report.json", r);
  write_manifest(dir, "bench", c, {c.workdir / "finetune" / "teacher.bin", c.workdir / "distill" / "student.bin"},
                 {dir / "report.json"});
  return "bench: speedup " + io::format_fixed(speed.speedup, 1) + "x, parameter ratio " + io::format_fixed(sp / tp, 4);
}

using StageFn = std::string (*)(const PipelineConfig&);

const std::vector<std::pair<std::string, StageFn>>& stages() {
  static const std::vector<std::pair<std::string, StageFn>> s{
      {"synth", stage_synth},       {"mine", stage_mine},         {"cluster", stage_cluster},
      {"label-apply", stage_label_apply}, {"annotate", stage_annotate}, {"build-kg", stage_build_kg},
      {"pretrain-adapter", stage_pretrain}, {"finetune", stage_finetune}, {"distill", stage_distill},
      {"eval", stage_eval},         {"bench", stage_bench}};
  return s;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : stages()) n.push_back(name);
    return n;
  }();
  return names;
}

std::string run_stage(const std::string& stage, const PipelineConfig& config) {
  config.validate();
  for (const auto& [name, fn] : stages()) {
    if (name != stage) continue;
    try {
      return fn(config);
    } catch (const ValidationError&) {
      throw;
    } catch (const RuntimeFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw RuntimeFailure(stage + ": " + e.what());
    }
  }
  throw ValidationError("unknown stage '" + stage + "'");
}

}  // namespace kaid
