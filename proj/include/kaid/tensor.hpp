#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace kaid::nn {

// Dense row-major array of doubles. Everything the models touch is viewed as
// a matrix: rows() is the product of all leading dimensions, cols() the last.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(count(shape), fill) {}

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor row(std::vector<double> values) {
    Tensor t;
    t.shape = {1, values.size()};
    t.data = std::move(values);
    return t;
  }

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : data.size() / cols(); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double* row_ptr(std::size_t r) { return data.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

std::string shape_string(const std::vector<std::size_t>& shape);

// A named trainable tensor. The gradient is a scratch buffer written by
// backward passes, so it stays writable through const model references.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() const { grad.zero(); }
};

}  // namespace kaid::nn
