#include "kaid/layers.hpp"

#include "kaid/error.hpp"

namespace kaid::nn {

Tensor Initializer::normal(std::vector<std::size_t> shape) { return normal(std::move(shape), stddev_); }

Tensor Initializer::normal(std::vector<std::size_t> shape, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = dist(rng_);
  return t;
}

Linear::Linear(std::size_t in, std::size_t out, const std::string& name, Initializer& init)
    : weight(name + ".weight", init.normal({in, out})), bias(name + ".bias", Tensor({out})) {}

Var Linear::forward(Tape& tape, Var x) const { return linear(x, tape.parameter(weight), tape.parameter(bias)); }

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(std::size_t width, const std::string& name)
    : gamma(name + ".gamma", Tensor({width}, 1.0)), beta(name + ".beta", Tensor({width})) {}

Var LayerNorm::forward(Tape& tape, Var x) const {
  return layer_norm(x, tape.parameter(gamma), tape.parameter(beta));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

EncoderLayer::EncoderLayer(std::size_t hidden_size, std::size_t num_heads, const std::string& name, Initializer& init)
    : hidden(hidden_size), heads(num_heads) {
  KAID_REQUIRE(num_heads > 0 && hidden_size % num_heads == 0,
               name + ": hidden size " + std::to_string(hidden_size) + " not divisible by " +
                   std::to_string(num_heads) + " heads");
  query = Linear(hidden, hidden, name + ".attn.query", init);
  key = Linear(hidden, hidden, name + ".attn.key", init);
  value = Linear(hidden, hidden, name + ".attn.value", init);
  attn_out = Linear(hidden, hidden, name + ".attn.output", init);
  attn_norm = LayerNorm(hidden, name + ".attn_norm");
  ffn_in = Linear(hidden, 4 * hidden, name + ".ffn.in", init);
  ffn_out = Linear(4 * hidden, hidden, name + ".ffn.out", init);
  ffn_norm = LayerNorm(hidden, name + ".ffn_norm");
}

Var EncoderLayer::forward(Tape& tape, Var x) const {
  KAID_REQUIRE(tape.value(x).cols() == hidden, "encoder layer expects width " + std::to_string(hidden) + ", got " +
                                                   std::to_string(tape.value(x).cols()));
  auto ctx = attention(query.forward(tape, x), key.forward(tape, x), value.forward(tape, x), heads);
  auto h = attn_norm.forward(tape, add(x, attn_out.forward(tape, ctx)));
  auto f = ffn_out.forward(tape, gelu(ffn_in.forward(tape, h)));
  return ffn_norm.forward(tape, add(h, f));
}

void EncoderLayer::collect(std::vector<Parameter*>& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  attn_out.collect(out);
  attn_norm.collect(out);
  ffn_in.collect(out);
  ffn_out.collect(out);
  ffn_norm.collect(out);
}

std::vector<Var> encoder_forward(std::span<const EncoderLayer> layers, Tape& tape, Var input) {
  if (layers.empty()) return {input};
  std::vector<Var> outputs;
  outputs.reserve(layers.size());
  Var h = input;
  for (const auto& layer : layers) {
    h = layer.forward(tape, h);
    outputs.push_back(h);
  }
  return outputs;
}

std::size_t parameter_count(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

}  // namespace kaid::nn
