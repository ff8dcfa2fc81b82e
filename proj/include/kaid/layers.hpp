#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kaid/autodiff.hpp"

namespace kaid::nn {

// Normal(0, stddev^2) weights, zero biases. One generator per model so all
// randomness flows from the model seed.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed, double stddev = 0.02) : rng_(seed), stddev_(stddev) {}
  Tensor normal(std::vector<std::size_t> shape);
  Tensor normal(std::vector<std::size_t> shape, double stddev);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double stddev_;
};

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // out

  Linear() = default;
  Linear(std::size_t in, std::size_t out, const std::string& name, Initializer& init);
  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;

  LayerNorm() = default;
  LayerNorm(std::size_t width, const std::string& name);
  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
};

// Post-norm transformer encoder layer:
//   h   = LN(x + Attn(x))
//   out = LN(h + W2 gelu(W1 h))   with inner width 4H.
struct EncoderLayer {
  std::size_t hidden = 0;
  std::size_t heads = 0;
  Linear query, key, value, attn_out, ffn_in, ffn_out;
  LayerNorm attn_norm, ffn_norm;

  EncoderLayer() = default;
  EncoderLayer(std::size_t hidden_size, std::size_t num_heads, const std::string& name, Initializer& init);
  Var forward(Tape& tape, Var x) const;
  void collect(std::vector<Parameter*>& out);
};

// All layer outputs in order; an empty stack returns {input}.
std::vector<Var> encoder_forward(std::span<const EncoderLayer> layers, Tape& tape, Var input);

std::size_t parameter_count(std::span<Parameter* const> params);

}  // namespace kaid::nn
