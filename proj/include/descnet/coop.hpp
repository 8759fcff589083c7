#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "descnet/networks.hpp"
#include "descnet/optim.hpp"
#include "descnet/sampler.hpp"

namespace descnet {

struct CoopConfig {
  AdamConfig descriptor_adam{0.001, 0.4, 0.999, 1e-8};
  AdamConfig generator_adam{0.0003, 0.6, 0.999, 1e-8};
  LangevinConfig langevin{20, 0.1, true, 1.0};
  std::size_t iterations = 1000;
  /// Observed items per iteration; taken cyclically from the data.
  std::size_t batch_size = 50;
  /// Chains per iteration, one latent vector each.
  std::size_t chain_count = 50;
  /// Adds N(0, sigma^2) to g(Z) when initialising chains. Off by default, so
  /// chains start exactly at g(Z).
  bool init_noise = false;
  std::uint64_t seed = 0;

  std::function<void(std::size_t iteration, double reconstruction_error)> on_iteration;

  void validate() const;
};

template <typename T>
struct CoopState {
  AdamState<T> descriptor_adam;
  AdamState<T> generator_adam;
  std::size_t iteration = 0;
};

template <typename T>
struct CoopStep {
  BasicTensor<T> z;        ///< latent vectors of this iteration
  BasicTensor<T> initial;  ///< Y-hat = g(Z) (+ noise)
  BasicTensor<T> revised;  ///< Y-tilde after Langevin revision
  /// |Y-tilde - g(Z)|^2 per voxel before the generator update.
  double reconstruction_error = 0;
  /// mean E(revised) - mean E(observed) before the descriptor update.
  double value = 0;
};

/// One round of cooperative training: draw Z, initialise chains at g(Z),
/// revise them by Langevin dynamics, ascend the descriptor on the observed /
/// revised pair, then regress g(Z) onto the revised examples with the same Z.
template <typename T>
CoopStep<T> coop_iteration(DescriptorNet<T>& desc, GeneratorNet<T>& gen,
                           const BasicTensor<T>& observed, const CoopConfig& cfg,
                           CoopState<T>& state);

template <typename T>
struct CoopResult {
  std::vector<double> reconstruction_error;
  std::vector<double> value;
};

template <typename T>
CoopResult<T> train_coop(const BasicTensor<T>& data, DescriptorNet<T>& desc, GeneratorNet<T>& gen,
                         const CoopConfig& cfg);

/// k + 1 generator outputs (inference mode, no noise) along the segment
/// Z1 -> Z2; Z1 and Z2 are single latent rows [1, d].
template <typename T>
std::vector<BasicTensor<T>> interpolate(const GeneratorNet<T>& gen, const BasicTensor<T>& z1,
                                        const BasicTensor<T>& z2, std::size_t k);

/// g(Za - Zb + Zc) in inference mode.
template <typename T>
BasicTensor<T> latent_arithmetic(const GeneratorNet<T>& gen, const BasicTensor<T>& za,
                                 const BasicTensor<T>& zb, const BasicTensor<T>& zc);

/// [n, d] standard normal latent vectors.
template <typename T>
BasicTensor<T> sample_latent(std::size_t n, std::size_t d, Rng& rng);

}  // namespace descnet
