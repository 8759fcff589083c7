#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "descnet/networks.hpp"
#include "descnet/rng.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

struct LangevinConfig {
  std::size_t steps = 20;
  double step_size = 0.1;
  bool noise_enabled = true;
  /// Scales the drift only: Y' = Y - (dt / 2T) dE/dY + sqrt(dt) eps.
  double temperature = 1.0;

  void validate() const;
};

/// Persistent synthesized examples [n, ...] with one random stream per chain.
template <typename T>
struct ChainSet {
  BasicTensor<T> states;
  std::vector<Rng> rngs;

  std::size_t size() const { return rngs.size(); }
};

/// `count` chains drawn from the reference distribution N(0, s^2 I); chain i
/// uses stream i of `seed`.
template <typename T>
ChainSet<T> init_chains(const DescriptorNet<T>& net, std::size_t count, std::uint64_t seed);

/// `count` chains started from training items, taken cyclically from `data`.
template <typename T>
ChainSet<T> init_chains_from_data(const BasicTensor<T>& data, std::size_t count,
                                  std::uint64_t seed);

/// One Langevin update of every item in `y`; item n draws its noise from rngs[n].
template <typename T>
void langevin_step(const DescriptorNet<T>& net, BasicTensor<T>& y, const LangevinConfig& cfg,
                   std::span<Rng> rngs);

/// Advances every chain `cfg.steps` steps. steps = 0 leaves the chains untouched.
template <typename T>
void run_chain(const DescriptorNet<T>& net, ChainSet<T>& chains, const LangevinConfig& cfg);

/// Langevin dynamics restricted to voxels whose mask cell is set; every other
/// voxel keeps the exact bits of `y0`. `masks` holds one mask per item, or a
/// single mask shared by all items.
template <typename T>
BasicTensor<T> run_masked(const DescriptorNet<T>& net, const BasicTensor<T>& y0,
                          std::span<const CorruptionMask> masks, const LangevinConfig& cfg,
                          std::span<Rng> rngs);

/// Langevin dynamics in the null space of the block-mean operator C with the
/// given factor, so C Y stays at C y0. Each step moves Y by (I - C-C) dY and then
/// re-anchors the block means to C y0, which removes float round-off drift.
template <typename T>
BasicTensor<T> run_projected(const DescriptorNet<T>& net, const BasicTensor<T>& y0, int factor,
                             const LangevinConfig& cfg, std::span<Rng> rngs);

/// One stream per item of `seed`, as used by the chain helpers.
std::vector<Rng> make_streams(std::uint64_t seed, std::size_t count);

}  // namespace descnet
