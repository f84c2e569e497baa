#pragma once

#include "icprl/tensor.hpp"

namespace icprl::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed registered parameter list. step()
// consumes whatever gradients have accumulated on the parameters; callers
// zero them explicitly between batches.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  void step();
  void zero_grads();
  long step_count() const { return step_count_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace icprl::nn
