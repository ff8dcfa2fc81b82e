// Python bindings for the pipeline and its core building blocks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kaid/corpus.hpp"
#include "kaid/distillation.hpp"
#include "kaid/entity_matcher.hpp"
#include "kaid/error.hpp"
#include "kaid/kg_store.hpp"
#include "kaid/metrics.hpp"
#include "kaid/phrase_miner.hpp"
#include "kaid/pipeline.hpp"
#include "kaid/synthetic.hpp"

namespace py = pybind11;
using namespace kaid;

namespace {

Corpus corpus_from_lines(const std::vector<std::string>& lines) {
  Corpus c;
  for (std::size_t i = 0; i < lines.size(); ++i) c.sentences.push_back(make_sentence(static_cast<std::int64_t>(i), lines[i]));
  return c;
}

py::list mentions_to_py(const std::vector<Mention>& mentions) {
  py::list out;
  for (const auto& m : mentions) out.append(py::make_tuple(m.start, m.end, m.phrase));
  return out;
}

py::dict stats_to_py(const KgStats& s) {
  py::dict d;
  d["entities"] = s.entity_count;
  d["relations"] = s.relation_count;
  d["tuples"] = s.tuple_count;
  d["sentences"] = s.sentence_count;
  d["zero_entity_sentences"] = s.zero_entity_sentences;
  return d;
}

// Each annotation is a dict {tokens, mentions: [(start, end, phrase)], relation}.
std::vector<AnnotatedSentence> annotations_from_py(const py::list& items) {
  std::vector<AnnotatedSentence> out;
  std::int64_t id = 0;
  for (const auto& item : items) {
    const auto d = item.cast<py::dict>();
    AnnotatedSentence a;
    a.sentence.id = d.contains("id") ? d["id"].cast<std::int64_t>() : id;
    a.sentence.tokens = d["tokens"].cast<std::vector<std::string>>();
    for (const auto& m : d["mentions"]) {
      const auto t = m.cast<py::tuple>();
      a.mentions.push_back({t[0].cast<std::size_t>(), t[1].cast<std::size_t>(), t[2].cast<std::string>()});
    }
    if (!d["relation"].is_none()) a.relation = d["relation"].cast<std::string>();
    out.push_back(std::move(a));
    ++id;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_kaid, m) {
  m.doc() = "Knowledge acquisition, adapter infusion and distillation pipeline";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def("tokenize", [](const std::string& text) { return tokenize(text); });

  m.def(
      "mine_phrases",
      [](const std::vector<std::string>& sentences, std::uint64_t min_frequency, double min_quality,
         std::size_t max_len, bool trim_stopword_edges) {
        MinerConfig cfg;
        cfg.min_frequency = min_frequency;
        cfg.min_quality = min_quality;
        cfg.max_len = max_len;
        cfg.trim_stopword_edges = trim_stopword_edges;
        const auto lex = mine_phrases(corpus_from_lines(sentences), cfg);
        py::list out;
        for (const auto& p : lex.phrases) out.append(py::make_tuple(p.text(), p.frequency, p.quality));
        return out;
      },
      py::arg("sentences"), py::arg("min_frequency") = 3, py::arg("min_quality") = 0.5, py::arg("max_len") = 4,
      py::arg("trim_stopword_edges") = true, "Returns (phrase, frequency, quality) tuples, best first.");

  py::class_<Matcher>(m, "Matcher")
      .def(py::init([](const std::vector<std::string>& phrases) {
             std::vector<std::vector<std::string>> toks;
             for (const auto& p : phrases) toks.push_back(tokenize(p));
             return Matcher(toks);
           }),
           py::arg("phrases"))
      .def(
          "find_mentions",
          [](const Matcher& self, const std::vector<std::string>& tokens) { return mentions_to_py(self.find_mentions(tokens)); },
          py::arg("tokens"))
      .def(
          "find_mentions_in",
          [](const Matcher& self, const std::string& text) { return mentions_to_py(self.find_mentions(tokenize(text))); },
          py::arg("text"))
      .def_property_readonly("pattern_count", &Matcher::pattern_count);

  m.def(
      "build_kg",
      [](const py::list& annotations) {
        const auto a = annotations_from_py(annotations);
        const auto kg = build_kg(a);
        py::dict out;
        out["stats"] = stats_to_py(kg_stats(kg));
        py::list facts;
        for (const auto& f : kg.facts) facts.append(py::make_tuple(f.relation, f.entities, f.sentence_ids));
        out["facts"] = facts;
        out["jsonl"] = kg_to_jsonl(kg);
        return out;
      },
      py::arg("annotations"));

  m.def(
      "f1_score",
      [](const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
         const std::vector<std::string>& classes) {
        const auto r = f1_score(predictions, golds, classes);
        py::dict d;
        d["macro_f1"] = r.macro_f1;
        d["micro_f1"] = r.micro_f1;
        d["accuracy"] = r.accuracy;
        py::dict per;
        for (std::size_t i = 0; i < r.classes.size(); ++i) per[py::str(r.classes[i])] = r.per_class[i].f1;
        d["per_class_f1"] = per;
        d["confusion"] = r.confusion;
        return d;
      },
      py::arg("predictions"), py::arg("golds"), py::arg("classes"));
  m.def(
      "auc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "distill_loss",
      [](const std::vector<double>& p, const std::vector<double>& logits, const std::vector<double>& g, double lambda) {
        return distill_loss_value(p, logits, g, lambda);
      },
      py::arg("teacher_probs"), py::arg("logits"), py::arg("gold"), py::arg("lam"));

  m.def(
      "synthetic_domain",
      [](std::uint64_t seed, std::size_t sentences, double noise_rate, std::size_t num_relations,
         std::size_t phrases_per_relation) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.sentences = sentences;
        spec.noise_rate = noise_rate;
        spec.num_relations = num_relations;
        spec.phrases_per_relation = phrases_per_relation;
        const auto d = generate_synthetic_domain(spec);
        py::dict out;
        std::vector<std::string> lines;
        for (const auto& s : d.corpus.sentences) lines.push_back(s.raw);
        out["corpus"] = lines;
        out["relations"] = d.relations;
        py::list phrases;
        for (const auto& p : d.phrases) phrases.append(py::make_tuple(p.text(), d.relations[p.relation], p.seen));
        out["phrases"] = phrases;
        out["sentence_relations"] = truth_relations(d);
        out["golden_kg"] = stats_to_py(kg_stats(d.golden_kg));
        return out;
      },
      py::arg("seed") = 0, py::arg("sentences") = 5000, py::arg("noise_rate") = 0.2, py::arg("num_relations") = 5,
      py::arg("phrases_per_relation") = 4);

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def("set", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.set(k, v); })
      .def("load", [](PipelineConfig& c, const std::filesystem::path& p) { c.load_file(p); })
      .def("get", &PipelineConfig::get)
      .def("keys", &PipelineConfig::keys)
      .def("errors", &PipelineConfig::errors)
      .def("validate", &PipelineConfig::validate)
      .def("canonical", &PipelineConfig::canonical)
      .def("hash", &PipelineConfig::hash);

  m.def("stage_names", &stage_names);
  m.def("run_stage", &run_stage, py::arg("stage"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>(), "Runs one stage and returns its summary line.");
}
