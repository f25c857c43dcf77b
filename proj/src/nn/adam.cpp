#include "artmetric/nn/adam.hpp"

#include <cmath>

namespace artmetric::nn {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    float* w = p->value.ptr();
    const float* g = p->grad.ptr();
    float* m = m_[i].ptr();
    float* v = v_[i].ptr();
    const size_t n = p->value.size();
    for (size_t j = 0; j < n; ++j) {
      const double grad = g[j] + cfg_.weight_decay * w[j];
      m[j] = static_cast<float>(cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * grad);
      v[j] = static_cast<float>(cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * grad * grad);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

}  // namespace artmetric::nn
