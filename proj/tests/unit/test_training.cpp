#include <doctest.h>

#include "kaid/error.hpp"
#include "kaid/infusion.hpp"

using namespace kaid;

namespace {

Vocabulary vocab() {
  return Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[PLC]", "buy", "filler", "lose", "refund", "ship",
                                  "the", "thing", "where"});
}

KaidConfig config(bool adapter = true) {
  KaidConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.adapter_layers = 2;
  c.adapter_hidden = 8;
  c.adapter_heads = 2;
  c.taps = {0, 1};
  c.num_relations = 2;
  c.max_len = 16;
  c.use_adapter = adapter;
  return c;
}

// The relation is decided by one keyword.
std::vector<RelationExample> keyword_kg() {
  std::vector<RelationExample> out;
  const std::vector<std::string> fill{"the", "thing", "filler", "where"};
  for (int i = 0; i < 24; ++i) {
    RelationExample ex;
    ex.sentence_id = i;
    ex.tokens = {fill[i % 4], i % 2 ? "ship" : "refund", fill[(i / 2) % 4]};
    ex.entity_starts = {1};
    ex.relation = i % 2 ? "delivery" : "money";
    out.push_back(ex);
  }
  return out;
}

TaskDataset task(const Vocabulary& v) {
  TaskDataset d;
  d.classes = {"UNKNOWN", "buy", "lose"};
  for (int i = 0; i < 12; ++i) {
    TaskExample ex;
    ex.tokens = {"where", i % 3 == 0 ? "thing" : (i % 3 == 1 ? "buy" : "lose")};
    ex.input = encode_input(ex.tokens, std::vector<Mention>{}, v, 16);
    ex.label = static_cast<std::size_t>(i % 3);
    d.examples.push_back(ex);
  }
  return d;
}

}  // namespace

TEST_CASE("pretrain_adapter leaves the backbone bitwise unchanged at every step") {
  KaidModel model(config(), vocab(), 1);
  const auto before = component_checksum(model, "backbone");
  const auto adapter_before = component_checksum(model, "adapter");
  TrainConfig tc{1, 1e-2, 5, 0};
  std::size_t steps = 0;
  const auto kg = keyword_kg();
  pretrain_adapter(model, kg, std::vector<std::string>{"delivery", "money"}, tc,
                   [&](std::size_t) {
                     ++steps;
                     CHECK(component_checksum(model, "backbone") == before);
                   });
  CHECK(steps == 5);
  CHECK(component_checksum(model, "adapter") != adapter_before);
  CHECK(model.adapter_pretrained());
}

TEST_CASE("pretraining learns a keyword-determined relation") {
  KaidModel model(config(), vocab(), 2);
  TrainConfig tc{20, 3e-3, 4, 1};
  const auto kg = keyword_kg();
  const auto rep = pretrain_adapter(model, kg, std::vector<std::string>{"delivery", "money"}, tc);
  CHECK(rep.accuracy_history.back() >= 0.95);
}

TEST_CASE("pretrain rejects relations outside the relation list") {
  KaidModel model(config(), vocab(), 2);
  const auto kg = keyword_kg();
  CHECK_THROWS_AS(pretrain_adapter(model, kg, std::vector<std::string>{"delivery"}, TrainConfig{}), ValidationError);
}

TEST_CASE("pretraining is deterministic per seed") {
  const auto kg = keyword_kg();
  TrainConfig tc{2, 1e-2, 4, 9};
  KaidModel a(config(), vocab(), 3), b(config(), vocab(), 3);
  pretrain_adapter(a, kg, std::vector<std::string>{"delivery", "money"}, tc);
  pretrain_adapter(b, kg, std::vector<std::string>{"delivery", "money"}, tc);
  CHECK(component_checksum(a, "adapter") == component_checksum(b, "adapter"));
}

TEST_CASE("finetune leaves the adapter bitwise unchanged at every step") {
  KaidModel model(config(), vocab(), 4);
  const auto kg = keyword_kg();
  pretrain_adapter(model, kg, std::vector<std::string>{"delivery", "money"}, TrainConfig{1, 1e-2, 8, 0});
  const auto adapter = component_checksum(model, "adapter");
  const auto backbone = component_checksum(model, "backbone");
  const auto data = task(model.vocab());
  std::size_t steps = 0;
  finetune(model, data, TrainConfig{2, 1e-2, 6, 0}, [&](std::size_t) {
    ++steps;
    CHECK(component_checksum(model, "adapter") == adapter);
  });
  CHECK(steps == 4);
  CHECK(component_checksum(model, "backbone") != backbone);
  CHECK(model.head_classes("task").size() == 3);
}

TEST_CASE("finetune requires a pretrained adapter in adapter mode") {
  KaidModel model(config(), vocab(), 4);
  CHECK_THROWS_AS(finetune(model, task(model.vocab()), TrainConfig{}), ValidationError);
  KaidModel base(config(false), vocab(), 4);
  CHECK_NOTHROW(finetune(base, task(base.vocab()), TrainConfig{1, 1e-3, 4, 0}));
}

TEST_CASE("task datasets are validated") {
  auto d = task(vocab());
  d.examples[0].label = 7;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d = task(vocab());
  d.classes = {"buy", "lose", "other"};
  CHECK_THROWS_AS(d.validate(), ValidationError);  // no UNKNOWN
  TaskDataset m;
  m.kind = TaskKind::kMatching;
  m.classes = {"0", "1", "2"};
  CHECK_THROWS_AS(m.validate(), ValidationError);
  CHECK_THROWS_AS(parse_task_kind("ranking"), ValidationError);
  TrainConfig bad{0, -1.0, 0, 0};
  CHECK(bad.errors().size() == 3);
}
