#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "descnet/networks.hpp"
#include "descnet/optim.hpp"
#include "descnet/sampler.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

enum class TrainMode { Unconditional, Masked, Projected };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

/// Parameters or samples became non-finite during training.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : NumericError("training diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// One line of the metrics log.
struct IterationRecord {
  std::size_t iteration = 0;
  /// mean E(synthesized) - mean E(observed), before the parameter update.
  double value = 0;
  double mean_energy_observed = 0;
  double mean_energy_synthesized = 0;
  double wall_time = 0;  ///< seconds since training started
  bool noise_enabled = true;
};

/// Newline-free JSON object for one record.
std::string to_json_line(const IterationRecord& record);

inline constexpr std::size_t kNoiseAlwaysOn = std::numeric_limits<std::size_t>::max();

struct TrainConfig {
  AdamConfig adam{0.001, 0.5, 0.999, 1e-8};
  std::size_t iterations = 1000;
  std::size_t batch_size = 20;
  /// Persistent chains (unconditional mode only).
  std::size_t chain_count = 25;
  LangevinConfig langevin{20, 0.1, true, 1.0};
  /// Langevin noise is switched off from this iteration index on.
  std::size_t noise_off_after = kNoiseAlwaysOn;
  TrainMode mode = TrainMode::Unconditional;
  double corrupt_fraction = 0.7;
  int down_factor = 2;
  CorruptionFill fill{};
  bool init_from_data = false;
  std::uint64_t seed = 0;

  /// Called after every iteration.
  std::function<void(const IterationRecord&)> on_iteration;
  /// Called with the Langevin settings of every sampler invocation.
  std::function<void(std::size_t iteration, const LangevinConfig&)> on_sample;

  void validate() const;
};

/// Batch mean of df/dtheta over `observed` minus that over `synthesized`.
template <typename T>
ParamGrads<T> mle_gradient(const DescriptorNet<T>& net, const BasicTensor<T>& observed,
                           const BasicTensor<T>& synthesized);

/// mean E(synthesized) - mean E(observed).
template <typename T>
double value_function(const DescriptorNet<T>& net, const BasicTensor<T>& observed,
                      const BasicTensor<T>& synthesized);

/// Adam ascent of theta along an mle gradient.
template <typename T>
void ascend(DescriptorNet<T>& net, AdamState<T>& state, const ParamGrads<T>& grad,
            const AdamConfig& cfg);

template <typename T>
struct TrainResult {
  ChainSet<T> chains;
  std::vector<IterationRecord> log;
};

/// Alternates `langevin.steps` steps of the persistent chains with one Adam
/// ascent step on the observed mini-batch (taken cyclically from `data`).
template <typename T>
TrainResult<T> train_descriptor(const BasicTensor<T>& data, DescriptorNet<T>& net,
                                const TrainConfig& cfg);

/// Conditional training: every iteration corrupts (masked) or down/up-scales
/// (projected) each observed item, samples the matching conditional chain from
/// it, and ascends on the resulting pairs.
template <typename T>
std::vector<IterationRecord> train_conditional(const BasicTensor<T>& data, DescriptorNet<T>& net,
                                               const TrainConfig& cfg);

/// Masked sampling from corrupted items with one stream per item.
template <typename T>
BasicTensor<T> recover(const DescriptorNet<T>& net, const BasicTensor<T>& corrupted,
                       std::span<const CorruptionMask> masks, const LangevinConfig& cfg,
                       std::uint64_t seed);

/// Up-scales `low` by `factor` and samples in the null space of the block mean.
template <typename T>
BasicTensor<T> super_resolve(const DescriptorNet<T>& net, const BasicTensor<T>& low, int factor,
                             const LangevinConfig& cfg, std::uint64_t seed);

}  // namespace descnet
