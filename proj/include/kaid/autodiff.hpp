#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kaid/tensor.hpp"

namespace kaid::nn {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

// Records one forward pass; backward() replays it in reverse. A tape built
// with gradients disabled keeps values only.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Parameters are referenced, not copied. They take part in backward only
  // when trainable and the tape records gradients.
  Var parameter(const Parameter& p);

  // Seeds d(loss)/d(loss) = 1 and accumulates into Parameter::grad.
  void backward(Var loss, double scale = 1.0);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Tensor& grad_mut(std::size_t id);
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool needs(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    const Parameter* param = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// Matrix ops. Vectors are 1 x n rows; scalars are 1 x 1.
Var matmul(Var a, Var b);
Var linear(Var x, Var weight, Var bias);  // x (T x in) * W (in x out) + b (out)
Var add(Var a, Var b);
Var scale(Var x, double factor);
Var gelu(Var x);
Var relu(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12);
// Multi-head scaled dot-product self-attention over already-projected Q, K, V.
Var attention(Var q, Var k, Var v, std::size_t heads);
Var embedding(Var table, std::span<const std::size_t> ids);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var mean_rows(Var x, std::span<const std::size_t> rows);
Var row(Var x, std::size_t r);
// Sliding windows: row t holds rows t..t+width-1 of x flattened; x is
// zero-padded to at least min_rows rows first.
Var unfold(Var x, std::size_t width, std::size_t min_rows);
Var max_rows(Var x);
// C(p, softmax(logits)) = -sum_i p_i ln softmax_i for a 1 x C logit row.
Var cross_entropy(Var logits, std::span<const double> target);

std::vector<double> softmax(std::span<const double> logits);
double cross_entropy_value(std::span<const double> target, std::span<const double> logits);
void validate_distribution(std::span<const double> p, double tolerance = 1e-6);

}  // namespace kaid::nn
