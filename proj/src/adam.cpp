#include "icprl/adam.hpp"

#include <cmath>

namespace icprl::nn {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    require(p.defined() && p.requires_grad(), "adam: parameter without requires_grad");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  step_count_++;
  double bc1 = 1.0 - std::pow(cfg_.beta1, (double)step_count_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, (double)step_count_);
  for (size_t pi = 0; pi < params_.size(); pi++) {
    auto& p = params_[pi];
    p.node->ensure_grad();
    auto& g = p.grad();
    auto& val = p.value();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < g.size(); i++) {
      if (!std::isfinite(g[i]))
        fail("adam: non-finite gradient in parameter '" + p.name() + "' at element " +
             std::to_string(i));
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grads() {
  for (auto& p : params_) {
    p.node->ensure_grad();
    std::fill(p.grad().begin(), p.grad().end(), 0.0);
  }
}

}  // namespace icprl::nn
