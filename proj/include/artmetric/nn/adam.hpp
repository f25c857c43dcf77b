#pragma once

#include <vector>

#include "artmetric/nn/layers.hpp"

namespace artmetric::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // L2 term added to the gradient
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);
  void step();

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long long t_ = 0;
};

}  // namespace artmetric::nn
