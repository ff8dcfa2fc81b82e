#include "kaid/optimizer.hpp"

#include <cmath>

#include "kaid/error.hpp"

namespace kaid::nn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : options_(options) {
  slots_.reserve(params.size());
  for (auto* p : params) slots_.push_back(Slot{p, Tensor(p->value.shape), Tensor(p->value.shape)});
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (auto& s : slots_) {
    auto& p = *s.param;
    if (!p.trainable) continue;
    if (p.grad.shape != p.value.shape) {
      if (p.grad.data.empty()) continue;  // never touched by a backward pass
      throw ValidationError("gradient shape " + shape_string(p.grad.shape) + " does not match parameter " + p.name +
                            " " + shape_string(p.value.shape));
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      s.m.data[i] = options_.beta1 * s.m.data[i] + (1.0 - options_.beta1) * g;
      s.v.data[i] = options_.beta2 * s.v.data[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = s.m.data[i] / c1;
      const double vhat = s.v.data[i] / c2;
      p.value.data[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) {
    if (s.param->grad.shape != s.param->value.shape) s.param->grad = Tensor(s.param->value.shape);
    s.param->grad.zero();
  }
}

}  // namespace kaid::nn
