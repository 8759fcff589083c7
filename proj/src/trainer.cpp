#include "descnet/trainer.hpp"

#include <chrono>
#include "json.hpp"

#include "descnet/resample.hpp"

namespace descnet {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Unconditional: return "unconditional";
    case TrainMode::Masked: return "masked";
    case TrainMode::Projected: return "projected";
  }
  return "unknown";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "unconditional") return TrainMode::Unconditional;
  if (name == "masked") return TrainMode::Masked;
  if (name == "projected") return TrainMode::Projected;
  throw std::invalid_argument("unknown training mode '" + name + "'");
}

std::string to_json_line(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["V"] = r.value;
  j["mean_energy_observed"] = r.mean_energy_observed;
  j["mean_energy_synthesized"] = r.mean_energy_synthesized;
  j["wall_time"] = r.wall_time;
  j["noise_enabled"] = r.noise_enabled;
  return j.dump();
}

void TrainConfig::validate() const {
  adam.validate();
  langevin.validate();
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (mode == TrainMode::Unconditional && chain_count == 0) {
    throw std::invalid_argument("chain count must be positive");
  }
  if (noise_off_after != kNoiseAlwaysOn && noise_off_after > iterations) {
    throw std::invalid_argument("noise_off_after exceeds the iteration count");
  }
  if (mode == TrainMode::Masked && !(corrupt_fraction >= 0 && corrupt_fraction < 1)) {
    throw std::invalid_argument("corrupt fraction must lie in [0, 1)");
  }
  if (mode == TrainMode::Projected && down_factor < 1) {
    throw std::invalid_argument("down-scale factor must be positive");
  }
}

namespace {

template <typename T>
void require_batch(const BasicTensor<T>& b, const char* what) {
  if (b.empty() || b.batch() == 0) throw std::invalid_argument(std::string(what) + " batch is empty");
}

double mean(const auto& values) {
  double acc = 0;
  for (auto v : values) acc += static_cast<double>(v);
  return acc / static_cast<double>(values.size());
}

template <typename T>
BasicTensor<T> minibatch(const BasicTensor<T>& data, std::size_t iteration, std::size_t size) {
  Shape shape = data.shape();
  shape[0] = size;
  BasicTensor<T> out(shape);
  const std::size_t M = data.batch();
  for (std::size_t j = 0; j < size; ++j) out.set_item(j, data.item((iteration * size + j) % M));
  return out;
}

std::uint64_t iteration_seed(std::uint64_t seed, std::size_t iteration) {
  return Rng::derive(seed, 0x5eed0000ULL + iteration).next_u64();
}

LangevinConfig iteration_langevin(const TrainConfig& cfg, std::size_t t) {
  LangevinConfig lc = cfg.langevin;
  if (cfg.noise_off_after != kNoiseAlwaysOn && t >= cfg.noise_off_after) lc.noise_enabled = false;
  return lc;
}

template <typename T>
void check_params(DescriptorNet<T>& net, std::size_t t) {
  for (const auto* p : net.parameters()) {
    if (!p->all_finite()) throw DivergenceError(t, "non-finite parameters");
  }
}

template <typename T>
IterationRecord update(DescriptorNet<T>& net, AdamState<T>& adam, const BasicTensor<T>& observed,
                       const BasicTensor<T>& synthesized, const TrainConfig& cfg, std::size_t t,
                       bool noise, std::chrono::steady_clock::time_point start) {
  IterationRecord rec;
  rec.iteration = t;
  rec.noise_enabled = noise;
  rec.mean_energy_observed = mean(net.energy(observed));
  rec.mean_energy_synthesized = mean(net.energy(synthesized));
  rec.value = rec.mean_energy_synthesized - rec.mean_energy_observed;
  ascend(net, adam, mle_gradient(net, observed, synthesized), cfg.adam);
  check_params(net, t);
  rec.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

template <typename T>
ParamGrads<T> mle_gradient(const DescriptorNet<T>& net, const BasicTensor<T>& observed,
                           const BasicTensor<T>& synthesized) {
  require_batch(observed, "observed");
  require_batch(synthesized, "synthesized");
  return net.score_grad_params(observed) - net.score_grad_params(synthesized);
}

template <typename T>
double value_function(const DescriptorNet<T>& net, const BasicTensor<T>& observed,
                      const BasicTensor<T>& synthesized) {
  require_batch(observed, "observed");
  require_batch(synthesized, "synthesized");
  const double v = mean(net.energy(synthesized)) - mean(net.energy(observed));
  if (!std::isfinite(v)) throw NumericError("value function is not finite");
  return v;
}

template <typename T>
void ascend(DescriptorNet<T>& net, AdamState<T>& state, const ParamGrads<T>& grad,
            const AdamConfig& cfg) {
  ParamGrads<T> descent = grad;
  descent.scale(T(-1));
  const auto tensors = std::as_const(descent).tensors();
  adam_step(state, net.parameters(), tensors, cfg);
}

template <typename T>
TrainResult<T> train_descriptor(const BasicTensor<T>& data, DescriptorNet<T>& net,
                                const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  require_batch(data, "training");
  require_same_shape(data.shape(), net.batch_shape(data.batch()), "training data");

  TrainResult<T> result;
  const std::uint64_t chain_seed = Rng::derive(cfg.seed, 1).next_u64();
  result.chains = cfg.init_from_data ? init_chains_from_data(data, cfg.chain_count, chain_seed)
                                     : init_chains(net, cfg.chain_count, chain_seed);
  AdamState<T> adam;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const LangevinConfig lc = iteration_langevin(cfg, t);
    if (cfg.on_sample) cfg.on_sample(t, lc);
    try {
      run_chain(net, result.chains, lc);
    } catch (const NumericError& e) {
      throw DivergenceError(t, e.what());
    }
    const auto observed = minibatch(data, t, cfg.batch_size);
    auto rec = update(net, adam, observed, result.chains.states, cfg, t, lc.noise_enabled, start);
    if (cfg.on_iteration) cfg.on_iteration(rec);
    result.log.push_back(rec);
  }
  return result;
}

template <typename T>
std::vector<IterationRecord> train_conditional(const BasicTensor<T>& data, DescriptorNet<T>& net,
                                               const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.mode == TrainMode::Unconditional) {
    throw std::invalid_argument("conditional training needs masked or projected mode");
  }
  net.validate();
  require_batch(data, "training");
  require_same_shape(data.shape(), net.batch_shape(data.batch()), "training data");
  if (cfg.mode == TrainMode::Projected) check_downscale_factor(data.shape(), cfg.down_factor);

  std::vector<IterationRecord> log;
  AdamState<T> adam;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const LangevinConfig lc = iteration_langevin(cfg, t);
    const auto observed = minibatch(data, t, cfg.batch_size);
    const std::uint64_t seed = iteration_seed(cfg.seed, t);
    auto rngs = make_streams(seed, observed.batch());
    BasicTensor<T> synthesized;
    try {
      if (cfg.mode == TrainMode::Masked) {
        Rng corrupt_rng = Rng::derive(seed, 0xc0ULL);
        synthesized = observed;
        std::vector<CorruptionMask> masks;
        bool any = false;
        for (std::size_t n = 0; n < observed.batch(); ++n) {
          const auto item = observed.item_tensor(n).template cast<float>();
          auto c = corrupt(item, cfg.corrupt_fraction, corrupt_rng, cfg.fill);
          // Only corrupted cells take the fill value; the rest stay in T precision.
          T* dst = synthesized.data() + n * synthesized.item_size();
          for (std::size_t j = 0; j < c.mask.size(); ++j) {
            if (c.mask.cells[j]) dst[j] = static_cast<T>(c.values[j]);
          }
          any = any || c.mask.any();
          masks.push_back(std::move(c.mask));
        }
        if (any) {
          if (cfg.on_sample) cfg.on_sample(t, lc);
          synthesized = run_masked(net, synthesized, std::span<const CorruptionMask>(masks), lc,
                                   std::span<Rng>(rngs));
        }
      } else {
        if (cfg.on_sample) cfg.on_sample(t, lc);
        const auto y0 = upscale(downscale(observed, cfg.down_factor), cfg.down_factor);
        synthesized = run_projected(net, y0, cfg.down_factor, lc, std::span<Rng>(rngs));
      }
    } catch (const NumericError& e) {
      throw DivergenceError(t, e.what());
    }
    auto rec = update(net, adam, observed, synthesized, cfg, t, lc.noise_enabled, start);
    if (cfg.on_iteration) cfg.on_iteration(rec);
    log.push_back(rec);
  }
  return log;
}

template <typename T>
BasicTensor<T> recover(const DescriptorNet<T>& net, const BasicTensor<T>& corrupted,
                       std::span<const CorruptionMask> masks, const LangevinConfig& cfg,
                       std::uint64_t seed) {
  auto rngs = make_streams(seed, corrupted.batch());
  return run_masked(net, corrupted, masks, cfg, std::span<Rng>(rngs));
}

template <typename T>
BasicTensor<T> super_resolve(const DescriptorNet<T>& net, const BasicTensor<T>& low, int factor,
                             const LangevinConfig& cfg, std::uint64_t seed) {
  const auto y0 = upscale(low, factor);
  auto rngs = make_streams(seed, y0.batch());
  return run_projected(net, y0, factor, cfg, std::span<Rng>(rngs));
}

#define DESCNET_INSTANTIATE_TRAINER(T)                                                            \
  template ParamGrads<T> mle_gradient(const DescriptorNet<T>&, const BasicTensor<T>&,             \
                                      const BasicTensor<T>&);                                     \
  template double value_function(const DescriptorNet<T>&, const BasicTensor<T>&,                  \
                                 const BasicTensor<T>&);                                          \
  template void ascend(DescriptorNet<T>&, AdamState<T>&, const ParamGrads<T>&, const AdamConfig&); \
  template TrainResult<T> train_descriptor(const BasicTensor<T>&, DescriptorNet<T>&,              \
                                           const TrainConfig&);                                   \
  template std::vector<IterationRecord> train_conditional(const BasicTensor<T>&,                  \
                                                          DescriptorNet<T>&, const TrainConfig&); \
  template BasicTensor<T> recover(const DescriptorNet<T>&, const BasicTensor<T>&,                 \
                                  std::span<const CorruptionMask>, const LangevinConfig&,         \
                                  std::uint64_t);                                                 \
  template BasicTensor<T> super_resolve(const DescriptorNet<T>&, const BasicTensor<T>&, int,      \
                                        const LangevinConfig&, std::uint64_t);

DESCNET_INSTANTIATE_TRAINER(float)
DESCNET_INSTANTIATE_TRAINER(double)

}  // namespace descnet
