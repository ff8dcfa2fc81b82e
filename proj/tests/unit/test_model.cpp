#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "../oracles.hpp"
#include "kaid/autodiff.hpp"
#include "kaid/checkpoint.hpp"
#include "kaid/error.hpp"
#include "kaid/infusion.hpp"
#include "kaid/layers.hpp"
#include "kaid/optimizer.hpp"

using namespace kaid;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Vocabulary tiny_vocab() { return Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[PLC]", "a", "b", "c", "d", "e"}); }

KaidConfig tiny_config(bool adapter = true) {
  KaidConfig c;
  c.layers = 2;
  c.hidden = 8;
  c.heads = 2;
  c.adapter_layers = 2;
  c.adapter_hidden = 8;
  c.adapter_heads = 2;
  c.taps = {0, 1};
  c.num_relations = 3;
  c.max_len = 16;
  c.use_adapter = adapter;
  c.init_std = 0.3;  // large enough that gradients are not vanishingly small
  return c;
}

EncodedSentence three_entities(const Vocabulary& v) {
  const std::vector<std::string> toks{"a", "b", "c", "d", "e", "a"};
  const std::vector<Mention> m{{0, 1, "a"}, {2, 4, "c d"}, {5, 6, "a"}};
  return encode_input(toks, m, v, 16);
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(std::move(shape));
  for (auto& x : t.data) x = n(rng);
  return t;
}

double scalar(Tape& t, Var v) { return t.value(v).data.at(0); }

}  // namespace

TEST_CASE("encode_input shifts mention starts and keeps [PLC] first") {
  auto v = Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[PLC]", "accepts", "express", "only", "our",
                                    "school", "tong", "yuan", "delivery"});
  const std::vector<std::string> toks{"our", "school", "only", "accepts", "yuan", "tong", "express", "delivery"};
  const std::vector<Mention> m{{1, 2, "school"}, {4, 6, "yuan tong"}};
  const auto e = encode_input(toks, m, v, 64);
  CHECK(e.entity_starts == std::vector<std::size_t>{1, 3, 6});
  CHECK(e.ids.front() == Vocabulary::kCls);
  CHECK(e.ids[1] == Vocabulary::kPlc);
  CHECK(e.ids.back() == Vocabulary::kSep);
  CHECK(e.ids.size() == toks.size() + 3);

  CHECK(encode_input(toks, std::vector<Mention>{}, v, 64).entity_starts == std::vector<std::size_t>{1});
  const auto cut = encode_input(toks, m, v, 7);  // room for 4 tokens
  CHECK(cut.ids.size() == 7);
  CHECK(cut.entity_starts == std::vector<std::size_t>{1, 3});
  CHECK(encode_input(std::vector<std::string>{"zzz"}, std::vector<Mention>{}, v, 8).ids[2] == Vocabulary::kUnk);
}

TEST_CASE("encode_pair places both questions and their mentions") {
  const auto v = tiny_vocab();
  const std::vector<std::string> q1{"a", "b"}, q2{"c", "d", "e"};
  const auto e = encode_pair(q1, std::vector<Mention>{{1, 2, "b"}}, q2, std::vector<Mention>{{0, 1, "c"}}, v, 32);
  CHECK(e.ids.size() == 2 + 2 + 1 + 3 + 1);
  CHECK(e.ids[4] == Vocabulary::kSep);
  CHECK(e.entity_starts == std::vector<std::size_t>{1, 3, 5});
  CHECK(e.ids.back() == Vocabulary::kSep);
}

TEST_CASE("config validation enumerates violations and derives taps") {
  KaidConfig c;
  c.hidden = 30;
  c.heads = 4;
  c.taps = {3, 1};
  c.adapter_layers = 3;
  CHECK(c.errors().size() >= 3);
  CHECK(KaidConfig::default_taps(24, 3) == std::vector<std::size_t>{0, 11, 23});
  CHECK(KaidConfig::default_taps(4, 3) == std::vector<std::size_t>{0, 1, 3});
  const auto round = KaidConfig::from_json(nlohmann::json::parse(tiny_config().to_json().dump()));
  CHECK(round.taps == tiny_config().taps);
}

TEST_CASE("softmax is normalized and shift invariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(6);
    for (auto& x : z) x = n(rng);
    const auto p = nn::softmax(z);
    double s = 0;
    for (double x : p) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-9);
    auto shifted = z;
    for (auto& x : shifted) x += 123.0;
    const auto q = nn::softmax(shifted);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - q[k]) <= 1e-9);
  }
}

TEST_CASE("cross entropy matches a direct log-sum-exp") {
  const std::vector<double> z{0.3, -1.2, 2.0}, p{0.2, 0.3, 0.5};
  CHECK(std::abs(nn::cross_entropy_value(p, z) - oracle::soft_cross_entropy(p, z)) <= 1e-12);
  Tape t;
  auto v = nn::cross_entropy(t.constant(Tensor::row(z)), p);
  CHECK(std::abs(scalar(t, v) - oracle::soft_cross_entropy(p, z)) <= 1e-12);
  // uniform logits over C classes give ln C for any target
  CHECK(std::abs(nn::cross_entropy_value(p, std::vector<double>{1, 1, 1}) - std::log(3.0)) <= 1e-12);
}

TEST_CASE("encoder layer gradient check") {
  nn::Initializer init(9, 0.3);
  nn::EncoderLayer layer(8, 2, "enc", init);
  Parameter x("x", random_tensor({5, 8}, 1));
  const Tensor r = random_tensor({1, 5}, 2), w = random_tensor({8, 1}, 3);
  std::vector<Parameter*> params{&x};
  layer.collect(params);
  auto loss = [&](Tape& t) {
    auto out = layer.forward(t, t.parameter(x));
    return nn::matmul(nn::matmul(t.constant(r), out), t.constant(w));
  };
  for (auto* p : params) p->zero_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  const auto res = oracle::finite_difference(params, [&] {
    Tape t(false);
    return scalar(t, loss(t));
  });
  INFO(res.worst);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("full model chain gradient check") {
  auto cfg = tiny_config();
  KaidModel model(cfg, tiny_vocab(), 5);
  model.add_head("relation", {"r0", "r1", "r2"}, 6);
  const auto enc = three_entities(model.vocab());
  REQUIRE(enc.entity_starts.size() == 4);
  const std::vector<double> target{0.0, 1.0, 0.0};
  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  {
    Tape t;
    t.backward(nn::cross_entropy(model.forward(t, enc, "relation").logits, target));
  }
  const auto res = oracle::finite_difference(params, [&] {
    Tape t(false);
    return scalar(t, nn::cross_entropy(model.forward(t, enc, "relation").logits, target));
  });
  INFO(res.worst);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("pooling equals a manual gather and average") {
  KaidModel model(tiny_config(), tiny_vocab(), 2);
  model.add_head("task", {"x", "y"}, 3);
  const auto enc = three_entities(model.vocab());
  Tape t(false);
  const auto tr = model.forward(t, enc, "task");
  const auto& x3 = t.value(tr.fused);
  const auto& x4 = t.value(tr.pooled);
  const std::size_t w = x3.cols();
  CHECK(w == model.fused_width());
  REQUIRE(x4.size() == 2 * w);
  for (std::size_t j = 0; j < w; ++j) {
    CHECK(x4.data[j] == x3.at(0, j));
    double m = 0;
    for (std::size_t k = 1; k < enc.entity_starts.size(); ++k) m += x3.at(enc.entity_starts[k], j);
    m /= static_cast<double>(enc.entity_starts.size() - 1);
    CHECK(std::abs(x4.data[w + j] - m) <= 1e-12);
  }

  EncodedSentence bare = enc;
  bare.entity_starts = {1};
  Tape t2(false);
  const auto tr2 = model.forward(t2, bare, "task");
  for (std::size_t j = 0; j < w; ++j) CHECK(t2.value(tr2.pooled).data[w + j] == t2.value(tr2.fused).at(1, j));

  // the entity mean itself does not depend on the order of its rows
  Tape t3(false);
  const auto x = t3.constant(x3);
  const std::vector<std::size_t> fwd{3, 5, 7}, rev{7, 3, 5};
  const auto a = t3.value(nn::mean_rows(x, fwd)).data, b = t3.value(nn::mean_rows(x, rev)).data;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);

  EncodedSentence empty = enc;
  empty.entity_starts.clear();
  CHECK_THROWS_AS(model.logits(empty, "task"), ValidationError);
}

TEST_CASE("baseline mode fuses the final backbone layer only") {
  KaidModel base(tiny_config(false), tiny_vocab(), 2);
  base.add_head("task", {"x", "y"}, 3);
  CHECK(base.fused_width() == 8);
  CHECK(base.parameter_count("adapter") == 0);
  Tape t(false);
  const auto tr = base.forward(t, three_entities(base.vocab()), "task");
  CHECK(t.value(tr.fused).data == t.value(tr.backbone.back()).data);
}

TEST_CASE("adding a constant to the projection bias keeps the argmax") {
  KaidModel model(tiny_config(), tiny_vocab(), 8);
  model.add_head("task", {"x", "y", "z"}, 1);
  const auto enc = three_entities(model.vocab());
  const auto before = predict(model, enc);
  for (auto* p : model.parameters("heads")) {
    if (p->name.find("task") != std::string::npos && p->name.find("bias") != std::string::npos)
      for (auto& b : p->value.data) b += 7.5;
  }
  const auto after = predict(model, enc);
  CHECK(after.label == before.label);
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(after.probabilities[k] - before.probabilities[k]) <= 1e-12);
}

TEST_CASE("parameter partition is exact and disjoint") {
  KaidModel model(tiny_config(), tiny_vocab(), 1);
  model.add_head("relation", {"a", "b", "c"}, 1);
  std::size_t total = 0;
  for (const char* c : {"backbone", "adapter", "heads"}) {
    for (const auto* p : std::as_const(model).parameters(c)) {
      CHECK(nn::component_of(p->name) == c);
      total += p->value.size();
    }
  }
  CHECK(total == model.parameter_count());
}

TEST_CASE("Adam takes the hand-computed first step and skips frozen parameters") {
  Parameter a("a", Tensor::row({1.0, -2.0}));
  Parameter b("b", Tensor::row({3.0}));
  b.trainable = false;
  nn::Adam opt({&a, &b}, {0.1, 0.9, 0.999, 1e-8});
  a.grad.data = {0.5, -4.0};
  b.grad.data = {1.0};
  opt.step();
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  CHECK(std::abs(a.value.data[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))) <= 1e-12);
  CHECK(std::abs(a.value.data[1] - (-2.0 + 0.1 * 4.0 / (4.0 + 1e-8))) <= 1e-12);
  CHECK(b.value.data[0] == 3.0);
  a.grad.data = {0.5, 0.5};
  opt.step();
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 0.5, v = 0.999 * 0.001 * 0.25 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(std::abs(a.value.data[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8))) <= 1e-12);
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "kaid_ckpt_test";
  std::filesystem::create_directories(dir);
  KaidModel model(tiny_config(), tiny_vocab(), 3);
  model.add_head("relation", {"a", "b", "c"}, 4);
  model.mark_adapter_pretrained();
  model.save(dir / "m");
  const auto back = KaidModel::load(dir / "m");
  CHECK(back.adapter_pretrained());
  for (const char* c : {"backbone", "adapter", "heads"}) CHECK(component_checksum(back, c) == component_checksum(model, c));
  const auto enc = three_entities(model.vocab());
  CHECK(back.logits(enc, "relation") == model.logits(enc, "relation"));

  KaidModel other(tiny_config(false), tiny_vocab(), 3);
  auto params = other.parameters();
  CHECK_THROWS_AS(nn::load_parameters(dir / "m", params), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("confidence statistics") {
  std::vector<std::vector<double>> uniform(4, std::vector<double>(4, 0.25));
  const auto s = confidence_stats(uniform);
  CHECK(std::abs(s.mean_max - 0.25) <= 1e-12);
  CHECK(std::abs(s.variance_max) <= 1e-12);
  const auto p = nn::softmax(std::vector<double>{800.0, 0.0, -5.0});
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::vector<double>> mixed{{0.9, 0.1}, {0.5, 0.5}};
  const auto m = confidence_stats(mixed);
  CHECK(std::abs(m.mean_max - 0.7) <= 1e-12);
  CHECK(std::abs(m.variance_max - 0.04) <= 1e-12);
}
