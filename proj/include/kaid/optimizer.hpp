#pragma once

#include <cstddef>
#include <vector>

#include "kaid/tensor.hpp"

namespace kaid::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive-moment updates over a fixed parameter list.
// Parameters marked non-trainable are skipped even if listed.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  void step();
  void zero_grad();
  std::size_t step_count() const { return steps_; }
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Slot {
    Parameter* param;
    Tensor m;
    Tensor v;
  };
  std::vector<Slot> slots_;
  AdamOptions options_;
  std::size_t steps_ = 0;
};

}  // namespace kaid::nn
