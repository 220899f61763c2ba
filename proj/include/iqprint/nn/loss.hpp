#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "iqprint/nn/tensor.hpp"

namespace iqprint::nn {

enum class LossKind { bce, ce };

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "ce") return LossKind::ce;
  throw ParameterError("unknown loss '" + s + "'");
}

inline std::string to_string(LossKind k) { return k == LossKind::bce ? "bce" : "ce"; }

namespace detail {

inline void check_logits(const Shape& s, std::size_t labels, std::size_t& batch, std::size_t& classes) {
  if (s.size() != 2) throw ShapeError("loss: logits must be [batch, classes], got " + to_string(s));
  batch = s[0];
  classes = s[1];
  if (labels != batch) throw ShapeError("loss: " + std::to_string(labels) + " labels for batch " + std::to_string(batch));
}

}  // namespace detail

/// Mean over batch and classes of the binary cross-entropy between
/// sigmoid(logit) and the one-hot target.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  std::size_t batch, classes;
  detail::check_logits(logits.shape(), labels.size(), batch, classes);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) throw ShapeError("loss: label out of range");
    for (std::size_t c = 0; c < classes; ++c) {
      const double z = logits[b * classes + c];
      const double t = labels[b] == c ? 1.0 : 0.0;
      acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
  }
  const double scale = 1.0 / static_cast<double>(batch * classes);
  return make_result<T>({1}, {static_cast<T>(acc * scale)}, {logits}, [labels, batch, classes, scale](Node<T>& self) {
    T* g = input_grad(self, 0);
    const T* z = input_value(self, 0);
    const double up = self.grad[0] * scale;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < classes; ++c) {
        const double zv = z[b * classes + c];
        const double s = zv >= 0 ? 1.0 / (1.0 + std::exp(-zv)) : std::exp(zv) / (1.0 + std::exp(zv));
        g[b * classes + c] += static_cast<T>(up * (s - (labels[b] == c ? 1.0 : 0.0)));
      }
  });
}

/// Mean over the batch of softmax cross-entropy.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
  std::size_t batch, classes;
  detail::check_logits(logits.shape(), labels.size(), batch, classes);
  auto probs = std::make_shared<std::vector<double>>(batch * classes);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) throw ShapeError("loss: label out of range");
    const T* z = logits.values().data() + b * classes;
    const double mx = *std::max_element(z, z + classes);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) se += std::exp(z[c] - mx);
    const double lse = mx + std::log(se);
    acc += lse - z[labels[b]];
    for (std::size_t c = 0; c < classes; ++c) (*probs)[b * classes + c] = std::exp(z[c] - lse);
  }
  const double scale = 1.0 / static_cast<double>(batch);
  return make_result<T>({1}, {static_cast<T>(acc * scale)}, {logits}, [labels, batch, classes, scale, probs](Node<T>& self) {
    T* g = input_grad(self, 0);
    const double up = self.grad[0] * scale;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < classes; ++c)
        g[b * classes + c] += static_cast<T>(up * ((*probs)[b * classes + c] - (labels[b] == c ? 1.0 : 0.0)));
  });
}

template <typename T>
Tensor<T> loss(const Tensor<T>& logits, const std::vector<std::size_t>& labels, LossKind kind) {
  return kind == LossKind::bce ? bce_with_logits(logits, labels) : cross_entropy(logits, labels);
}

}  // namespace iqprint::nn
