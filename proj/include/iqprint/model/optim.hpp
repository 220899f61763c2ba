#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "iqprint/error.hpp"
#include "iqprint/nn/tensor.hpp"

namespace iqprint::model {

enum class OptimizerKind { adam, sgd };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }
inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ParameterError("unknown optimizer '" + s + "'");
}

/// Adam (or plain SGD) with decoupled weight decay: each step first scales
/// every parameter by (1 - lr * weight_decay), then applies the update.
template <typename T>
class Optimizer {
 public:
  Optimizer(std::vector<nn::Tensor<T>> params, OptimizerKind kind, double weight_decay, bool amsgrad = false,
            double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), kind_(kind), wd_(weight_decay), amsgrad_(amsgrad), b1_(beta1), b2_(beta2), eps_(eps) {
    if (kind_ == OptimizerKind::adam) {
      for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
        if (amsgrad_) vmax_.emplace_back(p.size(), 0.0);
      }
    }
  }

  /// Applies one update from the accumulated gradients. Parameters without a
  /// gradient are treated as having a zero gradient.
  void step(double lr) {
    for (auto& p : params_)
      for (T g : p.grad())
        if (!std::isfinite(static_cast<double>(g))) throw DivergenceError("non-finite gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    const double decay = 1.0 - lr * wd_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto val = p.mutable_values();
      const auto grad = p.grad();
      const bool has = !grad.empty();
      for (std::size_t n = 0; n < val.size(); ++n) {
        const double g = has ? static_cast<double>(grad[n]) : 0.0;
        double w = static_cast<double>(val[n]);
        if (wd_ != 0.0) w *= decay;
        if (kind_ == OptimizerKind::sgd) {
          w -= lr * g;
        } else {
          double& m = m_[k][n];
          double& v = v_[k][n];
          m = b1_ * m + (1.0 - b1_) * g;
          v = b2_ * v + (1.0 - b2_) * g * g;
          double vh = v;
          if (amsgrad_) vh = vmax_[k][n] = std::max(vmax_[k][n], v);
          w -= lr * (m / bc1) / (std::sqrt(vh / bc2) + eps_);
        }
        val[n] = static_cast<T>(w);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<nn::Tensor<T>> params_;
  OptimizerKind kind_;
  double wd_;
  bool amsgrad_;
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_, vmax_;
};

}  // namespace iqprint::model
