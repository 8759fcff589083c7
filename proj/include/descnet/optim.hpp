#pragma once

#include <cstdint>
#include <vector>

#include "descnet/tensor.hpp"

namespace descnet {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// First and second moments per parameter tensor plus the step counter.
template <typename T>
struct AdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam step *descending* along `grads`:
///   p -= lr * m_hat / (sqrt(v_hat) + eps)
/// Ascent is descent on the negated gradient. Moments are created on first use.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<BasicTensor<T>*>& params,
               const std::vector<const BasicTensor<T>*>& grads, const AdamConfig& cfg);

}  // namespace descnet
