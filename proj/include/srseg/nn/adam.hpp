#pragma once

// Adam over a fixed, ordered set of parameter blocks. First/second moments
// are part of the checkpoint so a resumed run continues bit-for-bit.

#include <cmath>
#include <cstdint>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/nn/tensor.hpp"

namespace srseg::nn {

class Adam {
 public:
  Adam(std::vector<ParamTensor*> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->value.size(), 0.0f);
      v_[i].assign(params_[i]->value.size(), 0.0f);
    }
  }

  void zero_grad() {
    for (ParamTensor* p : params_) p->zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      ParamTensor& p = *params_[i];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        const double m = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
        const double v = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
        m_[i][j] = static_cast<float>(m);
        v_[i][j] = static_cast<float>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p.value[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  int64_t iterations() const { return t_; }

  // Checkpoint access.
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void restore(const std::vector<std::vector<float>>& m,
               const std::vector<std::vector<float>>& v, int64_t t) {
    if (m.size() != m_.size() || v.size() != v_.size())
      throw StateError("Adam::restore: state shape mismatch");
    m_ = m;
    v_ = v;
    t_ = t;
  }

 private:
  std::vector<ParamTensor*> params_;
  double beta1_, beta2_, eps_;
  std::vector<std::vector<float>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace srseg::nn
