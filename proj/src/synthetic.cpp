#include "kaid/synthetic.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "kaid/error.hpp"
#include "kaid/io.hpp"
#include "kaid/phrase_miner.hpp"

namespace kaid {

std::vector<std::string> SyntheticSpec::errors() const {
  std::vector<std::string> errs;
  auto rate = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) errs.push_back(std::string(name) + " must lie in [0, 1]");
  };
  if (num_relations < 2 || num_relations > 8) errs.push_back("synth.num_relations must be in [2, 8]");
  if (phrases_per_relation < 1) errs.push_back("synth.phrases_per_relation must be at least 1");
  if (sentences == 0) errs.push_back("synth.sentences must be at least 1");
  rate(noise_rate, "synth.noise_rate");
  rate(unknown_rate, "synth.unknown_rate");
  rate(seen_fraction, "synth.seen_fraction");
  rate(relation_template_rate, "synth.relation_template_rate");
  if (unknown_rate >= 1.0) errs.push_back("synth.unknown_rate must be below 1");
  if (neutral_templates == 0) errs.push_back("synth.neutral_templates must be at least 1");
  if (noise_vocabulary < 100) errs.push_back("synth.noise_vocabulary must be at least 100");
  return errs;
}

void SyntheticSpec::validate() const {
  auto errs = errors();
  if (!errs.empty()) throw ValidationError("inconsistent synthetic settings: " + io::join(errs, "; "));
}

std::string PlantedPhrase::text() const { return io::join(tokens, " "); }

namespace {

enum class PhraseSplit { kSeen, kUnseen, kAll };

constexpr const char* kSlot = "\x01";  // template slot marker

struct Template {
  std::vector<std::string> words;  // slot markers stand for phrase units
  std::size_t arity = 0;
};

struct Unit {
  std::vector<std::string> tokens;
  std::optional<std::size_t> phrase;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {}

  SyntheticDomain run();

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::string pseudo_word(std::size_t syllables);
  void make_vocabulary();
  void make_templates();
  std::vector<std::size_t> sample_tuple(std::size_t relation, PhraseSplit split);
  std::vector<std::string> noise_filler();
  // Fills a template; returns tokens and records mentions into truth.
  std::vector<std::string> realize(const Template& t, const std::vector<Unit>& fillers, SentenceTruth& truth);
  const Template& neutral_template(std::size_t arity) {
    const auto& pool = neutral_[arity];
    return pool[pick(pool.size())];
  }
  std::vector<std::string> question(std::size_t relation, bool unknown, PhraseSplit split, SentenceTruth& truth,
                                    bool relation_templates);
  std::vector<std::string> tuple_question(std::size_t relation, const std::vector<std::size_t>& tuple,
                                          SentenceTruth& truth);

  SyntheticSpec spec_;
  std::mt19937_64 rng_;
  std::vector<PlantedPhrase> phrases_;
  std::vector<std::vector<std::size_t>> by_relation_;
  std::vector<std::string> noise_words_;
  std::map<std::size_t, std::vector<Template>> neutral_;                 // arity -> templates
  std::vector<std::map<std::size_t, std::vector<Template>>> specific_;  // relation -> arity -> templates
};

std::string Generator::pseudo_word(std::size_t syllables) {
  static const char kConsonants[] = "bdfgklmnprstvz";
  static const char kVowels[] = "aeiou";
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += kConsonants[pick(sizeof(kConsonants) - 1)];
    w += kVowels[pick(sizeof(kVowels) - 1)];
  }
  return w;
}

void Generator::make_vocabulary() {
  std::set<std::string> used;
  auto fresh = [&](std::size_t syllables) {
    for (;;) {
      auto w = pseudo_word(syllables);
      if (!is_stopword(w) && used.insert(w).second) return w;
    }
  };
  by_relation_.assign(spec_.num_relations, {});
  const auto seen_count = [&] {
    auto n = static_cast<std::size_t>(std::llround(spec_.seen_fraction * static_cast<double>(spec_.phrases_per_relation)));
    return std::clamp<std::size_t>(n, 1, spec_.phrases_per_relation);
  }();
  for (std::size_t r = 0; r < spec_.num_relations; ++r) {
    for (std::size_t i = 0; i < spec_.phrases_per_relation; ++i) {
      PlantedPhrase p;
      const std::size_t len = 2 + pick(2);
      for (std::size_t k = 0; k < len; ++k) p.tokens.push_back(fresh(2));
      p.relation = r;
      p.seen = i < seen_count;
      by_relation_[r].push_back(phrases_.size());
      phrases_.push_back(std::move(p));
    }
  }
  for (std::size_t i = 0; i < spec_.noise_vocabulary; ++i) noise_words_.push_back(fresh(3 + pick(2)));
}

void Generator::make_templates() {
  std::vector<std::string> stop = stopword_list();
  std::sort(stop.begin(), stop.end());
  std::shuffle(stop.begin(), stop.end(), rng_);
  const std::size_t pools = spec_.num_relations + 1;
  std::vector<std::vector<std::string>> pool(pools);
  for (std::size_t i = 0; i < stop.size(); ++i) pool[i % pools].push_back(stop[i]);

  auto make = [&](const std::vector<std::string>& words, std::size_t arity) {
    auto draw = [&](std::size_t lo, std::size_t hi, std::vector<std::string>& out) {
      const std::size_t n = lo + pick(hi - lo + 1);
      for (std::size_t i = 0; i < n; ++i) out.push_back(words[pick(words.size())]);
    };
    Template t;
    t.arity = arity;
    draw(1, 3, t.words);
    for (std::size_t s = 0; s < arity; ++s) {
      if (s > 0) draw(3, 4, t.words);
      t.words.push_back(kSlot);
    }
    draw(0, 2, t.words);
    t.words.push_back("?");
    return t;
  };
  specific_.assign(spec_.num_relations, {});
  for (std::size_t arity = 1; arity <= 3; ++arity) {
    for (std::size_t i = 0; i < spec_.neutral_templates; ++i) neutral_[arity].push_back(make(pool[0], arity));
    for (std::size_t r = 0; r < spec_.num_relations; ++r) {
      for (int i = 0; i < 3; ++i) specific_[r][arity].push_back(make(pool[r + 1], arity));
    }
  }
}

std::vector<std::size_t> Generator::sample_tuple(std::size_t relation, PhraseSplit split) {
  std::vector<std::size_t> allowed;
  for (auto id : by_relation_[relation]) {
    if (split == PhraseSplit::kAll || phrases_[id].seen == (split == PhraseSplit::kSeen)) allowed.push_back(id);
  }
  if (allowed.empty()) allowed = by_relation_[relation];
  const std::size_t arity = 1 + pick(std::min<std::size_t>(3, allowed.size()));
  // Partial Fisher-Yates: the first `arity` entries are a uniform sample.
  for (std::size_t i = 0; i < arity; ++i) std::swap(allowed[i], allowed[i + pick(allowed.size() - i)]);
  allowed.resize(arity);
  return allowed;
}

std::vector<std::string> Generator::noise_filler() {
  std::vector<std::string> out{noise_words_[pick(noise_words_.size())]};
  if (uniform() < 0.5) out.push_back(noise_words_[pick(noise_words_.size())]);
  return out;
}

std::vector<std::string> Generator::realize(const Template& t, const std::vector<Unit>& fillers,
                                            SentenceTruth& truth) {
  std::vector<std::string> tokens;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < t.words.size(); ++i) {
    if (i > 0 && uniform() < spec_.noise_rate) tokens.push_back(noise_words_[pick(noise_words_.size())]);
    if (t.words[i] == kSlot) {
      const auto& unit = fillers.at(slot++);
      if (unit.phrase) {
        truth.phrases.push_back(*unit.phrase);
        truth.mentions.push_back(Mention{tokens.size(), tokens.size() + unit.tokens.size(),
                                         phrases_[*unit.phrase].text()});
      }
      tokens.insert(tokens.end(), unit.tokens.begin(), unit.tokens.end());
    } else {
      tokens.push_back(t.words[i]);
    }
  }
  return tokens;
}

std::vector<std::string> Generator::question(std::size_t relation, bool unknown, PhraseSplit split, SentenceTruth& truth,
                                             bool relation_templates) {
  std::vector<Unit> fillers;
  std::size_t arity;
  if (unknown) {
    arity = 1 + pick(3);
    for (std::size_t i = 0; i < arity; ++i) fillers.push_back(Unit{noise_filler(), std::nullopt});
  } else {
    truth.relation = relation;
    for (auto id : sample_tuple(relation, split)) fillers.push_back(Unit{phrases_[id].tokens, id});
    arity = fillers.size();
  }
  const bool specific = relation_templates && !unknown && uniform() < spec_.relation_template_rate;
  const auto& pool = specific ? specific_[relation][arity] : neutral_[arity];
  return realize(pool[pick(pool.size())], fillers, truth);
}

std::vector<std::string> Generator::tuple_question(std::size_t relation, const std::vector<std::size_t>& tuple,
                                                   SentenceTruth& truth) {
  truth.relation = relation;
  std::vector<Unit> fillers;
  for (auto id : tuple) fillers.push_back(Unit{phrases_[id].tokens, id});
  return realize(neutral_template(tuple.size()), fillers, truth);
}

SyntheticDomain Generator::run() {
  spec_.validate();
  make_vocabulary();
  make_templates();

  SyntheticDomain d;
  d.spec = spec_;
  for (std::size_t r = 0; r < spec_.num_relations; ++r) d.relations.push_back("rel" + std::to_string(r));
  d.phrases = phrases_;
  d.corpus.source_path = "synthetic";

  auto draw_relation = [&] { return pick(spec_.num_relations); };

  for (std::size_t i = 0; i < spec_.sentences; ++i) {
    SentenceTruth truth;
    const bool unknown = uniform() < spec_.unknown_rate;
    const std::size_t r = draw_relation();
    auto tokens = question(r, unknown, PhraseSplit::kAll, truth, true);
    d.corpus.sentences.push_back(Sentence{static_cast<std::int64_t>(i), io::join(tokens, " "), tokens});
    d.truth.push_back(std::move(truth));
  }

  auto classification = [&](std::size_t n, PhraseSplit split) {
    ClassificationDataset ds;
    ds.classes = d.relations;
    ds.classes.push_back(kUnknownLabel);
    std::sort(ds.classes.begin(), ds.classes.end());
    for (std::size_t i = 0; i < n; ++i) {
      SentenceTruth truth;
      const bool unknown = uniform() < spec_.unknown_rate;
      const std::size_t r = draw_relation();
      auto tokens = question(r, unknown, split, truth, false);
      ds.examples.push_back({io::join(tokens, " "), unknown ? std::string(kUnknownLabel) : d.relations[r]});
    }
    return ds;
  };
  const PhraseSplit held_out = spec_.unseen_test ? PhraseSplit::kUnseen : PhraseSplit::kAll;
  d.train = classification(spec_.train_examples, PhraseSplit::kSeen);
  d.test = classification(spec_.test_examples, held_out);

  auto matching = [&](std::size_t n, PhraseSplit split) {
    MatchingDataset ds;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = draw_relation();
      const auto tuple = sample_tuple(r, split);
      SentenceTruth t1, t2;
      MatchingExample ex;
      ex.q1 = io::join(tuple_question(r, tuple, t1), " ");
      ex.s = uniform() < 0.5 ? 1 : 0;
      if (ex.s == 1) {
        ex.q2 = io::join(tuple_question(r, tuple, t2), " ");
      } else {
        std::vector<std::size_t> other;
        std::size_t r2 = r;
        do {
          r2 = uniform() < 0.5 ? r : draw_relation();
          other = sample_tuple(r2, split);
        } while (other == tuple);
        ex.q2 = io::join(tuple_question(r2, other, t2), " ");
      }
      ds.examples.push_back(std::move(ex));
    }
    return ds;
  };
  d.matching_train = matching(spec_.matching_train, PhraseSplit::kSeen);
  d.matching_test = matching(spec_.matching_test, held_out);

  for (std::size_t i = 0; i < spec_.unlabeled; ++i) {
    SentenceTruth truth;
    const bool unknown = uniform() < spec_.unknown_rate;
    const std::size_t r = draw_relation();
    d.unlabeled.push_back(io::join(question(r, unknown, PhraseSplit::kAll, truth, false), " "));
  }

  const auto golden = golden_annotations(d);
  d.golden_kg = build_kg(golden, "synthetic-golden");
  return d;
}

}  // namespace

SyntheticDomain generate_synthetic_domain(const SyntheticSpec& spec) { return Generator(spec).run(); }

std::vector<std::string> truth_relations(const SyntheticDomain& domain) {
  std::vector<std::string> out;
  for (const auto& t : domain.truth) out.push_back(t.relation ? domain.relations[*t.relation] : kOtherRelation);
  return out;
}

std::vector<AnnotatedSentence> golden_annotations(const SyntheticDomain& domain) {
  std::vector<AnnotatedSentence> out;
  const auto names = truth_relations(domain);
  for (std::size_t i = 0; i < domain.corpus.sentences.size(); ++i) {
    AnnotatedSentence a;
    a.sentence = domain.corpus.sentences[i];
    a.mentions = domain.truth[i].mentions;
    a.relation = names[i];
    a.relation_confidence = 1.0;
    out.push_back(std::move(a));
  }
  return out;
}

RelationLabelFile oracle_cluster_labels(const Clustering& clustering, const Corpus& sample,
                                        const std::vector<std::string>& relation_by_sentence) {
  KAID_REQUIRE(clustering.assignments.size() == sample.sentences.size(),
               "oracle labels: clustering and sample sizes differ");
  std::vector<std::map<std::string, std::size_t>> votes(clustering.k);
  for (std::size_t i = 0; i < sample.sentences.size(); ++i) {
    const auto id = sample.sentences[i].id;
    KAID_REQUIRE(id >= 0 && static_cast<std::size_t>(id) < relation_by_sentence.size(),
                 "oracle labels: sentence " + std::to_string(id) + " has no golden relation");
    ++votes[clustering.assignments[i]][relation_by_sentence[static_cast<std::size_t>(id)]];
  }
  RelationLabelFile labels;
  for (std::size_t c = 0; c < clustering.k; ++c) {
    if (votes[c].empty()) continue;
    // std::map iterates names in order, so ties go to the smaller name.
    auto best = votes[c].begin();
    for (auto it = votes[c].begin(); it != votes[c].end(); ++it) {
      if (it->second > best->second) best = it;
    }
    labels[c] = best->first;
  }
  return labels;
}

RelationLabelFile oracle_cluster_labels(const Clustering& clustering, const Corpus& sample,
                                        const SyntheticDomain& domain) {
  return oracle_cluster_labels(clustering, sample, truth_relations(domain));
}

void write_synthetic_domain(const SyntheticDomain& d, const std::filesystem::path& dir) {
  std::string corpus;
  for (const auto& s : d.corpus.sentences) corpus += s.raw + "\n";
  io::write_file(dir / "corpus.txt", corpus);

  std::string planted = "phrase\trelation\tseen\n";
  for (const auto& p : d.phrases)
    planted += p.text() + "\t" + d.relations[p.relation] + "\t" + (p.seen ? "1" : "0") + "\n";
  io::write_file(dir / "planted_phrases.tsv", planted);

  std::string rel = "relation\n";
  for (const auto& r : d.relations) rel += r + "\n";
  io::write_file(dir / "relations.tsv", rel);

  std::string truth;
  const auto names = truth_relations(d);
  for (std::size_t i = 0; i < d.truth.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = d.corpus.sentences[i].id;
    j["relation"] = names[i];
    nlohmann::ordered_json mentions = nlohmann::ordered_json::array();
    for (const auto& m : d.truth[i].mentions) mentions.push_back({m.start, m.end, m.phrase});
    j["mentions"] = mentions;
    truth += j.dump() + "\n";
  }
  io::write_file(dir / "truth.jsonl", truth);
  io::write_file(dir / "golden_kg.jsonl", kg_to_jsonl(d.golden_kg));
  io::write_file(dir / "classification_train.tsv", classification_to_tsv(d.train));
  io::write_file(dir / "classification_test.tsv", classification_to_tsv(d.test));
  io::write_file(dir / "matching_train.tsv", matching_to_tsv(d.matching_train));
  io::write_file(dir / "matching_test.tsv", matching_to_tsv(d.matching_test));
  std::string unlabeled;
  for (const auto& u : d.unlabeled) unlabeled += u + "\n";
  io::write_file(dir / "unlabeled.txt", unlabeled);
}

std::vector<std::string> read_truth_relations(const std::filesystem::path& truth_jsonl) {
  if (!std::filesystem::exists(truth_jsonl)) throw ValidationError("truth file not found: " + truth_jsonl.string());
  std::vector<std::string> out;
  std::size_t line_no = 0;
  for (const auto& line : io::read_lines(truth_jsonl)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::int64_t>();
      KAID_REQUIRE(id >= 0, "negative sentence id");
      if (out.size() <= static_cast<std::size_t>(id)) out.resize(static_cast<std::size_t>(id) + 1, kOtherRelation);
      out[static_cast<std::size_t>(id)] = j.at("relation").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(truth_jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kaid
