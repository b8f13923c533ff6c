#pragma once

#include <vector>

#include "clozeqa/model.hpp"

namespace clozeqa {

struct AdamWConfig {
  double lr_backbone = 1e-5;
  double lr_new_modules = 1e-4;
  double warmup_fraction = 0.1;  // of total steps; applies to the new-module group
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long total_steps = 1;
};

// Adam with decoupled weight decay over two parameter groups: the backbone
// at a fixed rate, the knowledge modules with linear warm-up.
class AdamW {
 public:
  AdamW(std::vector<Parameter>& params, AdamWConfig config);

  double learning_rate(ParamGroup group, long step) const;
  // Applies the accumulated gradients, then clears them.
  void step();
  long steps_taken() const { return step_; }

 private:
  std::vector<Parameter>& params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long step_ = 0;
};

}  // namespace clozeqa
