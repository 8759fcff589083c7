#include "descnet/sampler.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include "descnet/resample.hpp"

namespace descnet {

void LangevinConfig::validate() const {
  if (!(step_size > 0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("Langevin step size must be positive");
  }
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("Langevin temperature must be positive");
  }
}

std::vector<Rng> make_streams(std::uint64_t seed, std::size_t count) {
  std::vector<Rng> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(Rng::derive(seed, i));
  return out;
}

template <typename T>
ChainSet<T> init_chains(const DescriptorNet<T>& net, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("chain count must be positive");
  ChainSet<T> c;
  c.rngs = make_streams(seed, count);
  c.states = BasicTensor<T>(net.batch_shape(count));
  const double s = static_cast<double>(net.s);
  for (std::size_t n = 0; n < count; ++n) {
    for (auto& v : c.states.item(n)) v = static_cast<T>(s * c.rngs[n].normal());
  }
  return c;
}

template <typename T>
ChainSet<T> init_chains_from_data(const BasicTensor<T>& data, std::size_t count,
                                  std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("chain count must be positive");
  if (data.empty()) throw std::invalid_argument("cannot initialise chains from an empty dataset");
  ChainSet<T> c;
  c.rngs = make_streams(seed, count);
  Shape shape = data.shape();
  shape[0] = count;
  c.states = BasicTensor<T>(shape);
  for (std::size_t n = 0; n < count; ++n) c.states.set_item(n, data.item(n % data.batch()));
  return c;
}

template <typename T>
void langevin_step(const DescriptorNet<T>& net, BasicTensor<T>& y, const LangevinConfig& cfg,
                   std::span<Rng> rngs) {
  cfg.validate();
  if (y.empty()) throw ShapeError("Langevin step on an empty batch");
  const std::size_t N = y.batch();
  if (cfg.noise_enabled && rngs.size() != N) {
    throw std::invalid_argument("Langevin step needs one random stream per item (" +
                                std::to_string(N) + "), got " + std::to_string(rngs.size()));
  }
  const auto grad = net.energy_grad_input(y);
  const T drift = static_cast<T>(cfg.step_size / (2.0 * cfg.temperature));
  const double noise = std::sqrt(cfg.step_size);
  const std::size_t item = y.item_size();
  T* data = y.data();
  const T* g = grad.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(N); ++n) {
    T* yi = data + static_cast<std::size_t>(n) * item;
    const T* gi = g + static_cast<std::size_t>(n) * item;
    if (cfg.noise_enabled) {
      Rng& rng = rngs[static_cast<std::size_t>(n)];
      for (std::size_t j = 0; j < item; ++j) {
        yi[j] = yi[j] - drift * gi[j] + static_cast<T>(noise * rng.normal());
      }
    } else {
      for (std::size_t j = 0; j < item; ++j) yi[j] = yi[j] - drift * gi[j];
    }
  }
}

namespace {

[[noreturn]] void report_divergence(std::size_t step) {
  throw NumericError("Langevin dynamics produced non-finite values at step " +
                     std::to_string(step));
}

}  // namespace

template <typename T>
void run_chain(const DescriptorNet<T>& net, ChainSet<T>& chains, const LangevinConfig& cfg) {
  cfg.validate();
  if (chains.states.batch() != chains.rngs.size()) {
    throw std::invalid_argument("chain set has mismatched states and random streams");
  }
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    try {
      langevin_step(net, chains.states, cfg, std::span<Rng>(chains.rngs));
    } catch (const NumericError&) {
      report_divergence(k);
    }
    if (!chains.states.all_finite()) report_divergence(k);
  }
}

template <typename T>
BasicTensor<T> run_masked(const DescriptorNet<T>& net, const BasicTensor<T>& y0,
                          std::span<const CorruptionMask> masks, const LangevinConfig& cfg,
                          std::span<Rng> rngs) {
  cfg.validate();
  if (y0.empty()) throw ShapeError("masked sampling on an empty batch");
  const std::size_t N = y0.batch();
  const std::size_t item = y0.item_size();
  if (masks.size() != N && masks.size() != 1) {
    throw ShapeError("masked sampling needs one mask per item or one shared mask");
  }
  bool any = false;
  for (const auto& m : masks) {
    if (m.size() != item) {
      throw ShapeError("mask has " + std::to_string(m.size()) + " cells, item has " +
                       std::to_string(item));
    }
    any = any || m.any();
  }
  if (!any) {
    std::cerr << "warning: masked sampling with an all-false mask leaves the input unchanged\n";
    return y0;
  }
  BasicTensor<T> y = y0;
  BasicTensor<T> next = y0;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    next = y;
    try {
      langevin_step(net, next, cfg, rngs);
    } catch (const NumericError&) {
      report_divergence(k);
    }
    for (std::size_t n = 0; n < N; ++n) {
      const auto& cells = masks[masks.size() == 1 ? 0 : n].cells;
      auto dst = y.item(n);
      auto src = next.item(n);
      for (std::size_t j = 0; j < item; ++j) {
        if (cells[j]) dst[j] = src[j];
      }
    }
    if (!y.all_finite()) report_divergence(k);
  }
  return y;
}

template <typename T>
BasicTensor<T> run_projected(const DescriptorNet<T>& net, const BasicTensor<T>& y0, int factor,
                             const LangevinConfig& cfg, std::span<Rng> rngs) {
  cfg.validate();
  check_downscale_factor(y0.shape(), factor);
  const BasicTensor<T> anchor = downscale(y0, factor);
  BasicTensor<T> y = y0;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    BasicTensor<T> next = y;
    try {
      langevin_step(net, next, cfg, rngs);
    } catch (const NumericError&) {
      report_divergence(k);
    }
    next -= y;
    y += project_nullspace(next, factor);
    BasicTensor<T> drift = anchor;
    drift -= downscale(y, factor);
    y += upscale(drift, factor);
    if (!y.all_finite()) report_divergence(k);
  }
  return y;
}

#define DESCNET_INSTANTIATE_SAMPLER(T)                                                            \
  template ChainSet<T> init_chains(const DescriptorNet<T>&, std::size_t, std::uint64_t);          \
  template ChainSet<T> init_chains_from_data(const BasicTensor<T>&, std::size_t, std::uint64_t);  \
  template void langevin_step(const DescriptorNet<T>&, BasicTensor<T>&, const LangevinConfig&,    \
                              std::span<Rng>);                                                    \
  template void run_chain(const DescriptorNet<T>&, ChainSet<T>&, const LangevinConfig&);          \
  template BasicTensor<T> run_masked(const DescriptorNet<T>&, const BasicTensor<T>&,              \
                                     std::span<const CorruptionMask>, const LangevinConfig&,      \
                                     std::span<Rng>);                                             \
  template BasicTensor<T> run_projected(const DescriptorNet<T>&, const BasicTensor<T>&, int,      \
                                        const LangevinConfig&, std::span<Rng>);

DESCNET_INSTANTIATE_SAMPLER(float)
DESCNET_INSTANTIATE_SAMPLER(double)

}  // namespace descnet
