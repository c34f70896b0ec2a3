#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "promind/tensor.hpp"

namespace promind::num {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay. Moments are kept per parameter in
// registration order; shapes are pinned at registration.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0) throw std::invalid_argument("adamw: lr must be positive");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].numel(), T(0));
      v_[i].assign(params_[i].numel(), T(0));
    }
  }

  int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  std::vector<Tensor<T>>& params() { return params_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p.numel() != m_[i].size()) throw std::invalid_argument("adamw: parameter shape changed");
      const std::vector<T>* gp = p.has_grad() ? &p.grad() : nullptr;
      T* w = p.data();
      for (size_t j = 0; j < p.numel(); ++j) {
        T gj = gp ? (*gp)[j] : T(0);
        if (cfg_.weight_decay != 0.0) {
          w[j] -= static_cast<T>(cfg_.lr * cfg_.weight_decay) * w[j];
        }
        m_[i][j] = static_cast<T>(cfg_.beta1) * m_[i][j] + static_cast<T>(1.0 - cfg_.beta1) * gj;
        v_[i][j] = static_cast<T>(cfg_.beta2) * v_[i][j] + static_cast<T>(1.0 - cfg_.beta2) * gj * gj;
        double mhat = static_cast<double>(m_[i][j]) / bc1;
        double vhat = static_cast<double>(v_[i][j]) / bc2;
        w[j] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        if (!std::isfinite(static_cast<double>(w[j]))) {
          throw std::runtime_error("adamw: non-finite parameter after step");
        }
      }
    }
  }

 private:
  std::vector<Tensor<T>> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  int64_t step_ = 0;
};

}  // namespace promind::num
