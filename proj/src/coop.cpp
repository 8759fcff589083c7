#include "descnet/coop.hpp"

#include <stdexcept>
#include <string>

#include "descnet/trainer.hpp"

namespace descnet {

void CoopConfig::validate() const {
  descriptor_adam.validate();
  generator_adam.validate();
  langevin.validate();
  if (batch_size == 0 || chain_count == 0) {
    throw std::invalid_argument("coop batch size and chain count must be positive");
  }
}

template <typename T>
BasicTensor<T> sample_latent(std::size_t n, std::size_t d, Rng& rng) {
  BasicTensor<T> z({n, d});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<T>(rng.normal());
  return z;
}

template <typename T>
CoopStep<T> coop_iteration(DescriptorNet<T>& desc, GeneratorNet<T>& gen,
                           const BasicTensor<T>& observed, const CoopConfig& cfg,
                           CoopState<T>& state) {
  cfg.validate();
  const std::size_t t = state.iteration;
  const std::uint64_t seed = Rng::derive(cfg.seed, 0xc0de0000ULL + t).next_u64();
  Rng latent_rng = Rng::derive(seed, 0);
  Rng noise_rng = Rng::derive(seed, 1);

  CoopStep<T> step;
  step.z = sample_latent<T>(cfg.chain_count, gen.latent_dim, latent_rng);
  step.initial = gen.generate(step.z, cfg.init_noise, &noise_rng, Mode::Train);

  ChainSet<T> chains;
  chains.states = step.initial;
  chains.rngs = make_streams(Rng::derive(seed, 2).next_u64(), cfg.chain_count);
  try {
    run_chain(desc, chains, cfg.langevin);
  } catch (const NumericError& e) {
    throw DivergenceError(t, e.what());
  }
  step.revised = std::move(chains.states);

  step.value = value_function(desc, observed, step.revised);
  ascend(desc, state.descriptor_adam, mle_gradient(desc, observed, step.revised),
         cfg.descriptor_adam);
  for (const auto* p : desc.parameters()) {
    if (!p->all_finite()) throw DivergenceError(t, "non-finite descriptor parameters");
  }

  auto lg = gen.loss_grad(step.z, step.revised, Mode::Train);
  step.reconstruction_error = lg.loss / static_cast<double>(step.revised.item_size());
  const auto grads = std::as_const(lg.grads).tensors();
  adam_step(state.generator_adam, gen.parameters(), grads, cfg.generator_adam);
  gen.update_running_stats(step.z);
  for (const auto* p : gen.parameters()) {
    if (!p->all_finite()) throw DivergenceError(t, "non-finite generator parameters");
  }
  ++state.iteration;
  return step;
}

template <typename T>
CoopResult<T> train_coop(const BasicTensor<T>& data, DescriptorNet<T>& desc, GeneratorNet<T>& gen,
                         const CoopConfig& cfg) {
  cfg.validate();
  desc.validate();
  gen.validate();
  if (data.empty()) throw std::invalid_argument("training batch is empty");
  require_same_shape(data.shape(), desc.batch_shape(data.batch()), "training data");
  Shape gen_item{1};
  gen_item.insert(gen_item.end(), gen.output_shape.begin(), gen.output_shape.end());
  require_same_shape(gen_item, desc.batch_shape(1), "generator output");

  CoopResult<T> result;
  CoopState<T> state;
  Shape batch_shape = data.shape();
  batch_shape[0] = cfg.batch_size;
  BasicTensor<T> observed(batch_shape);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    for (std::size_t j = 0; j < cfg.batch_size; ++j) {
      observed.set_item(j, data.item((t * cfg.batch_size + j) % data.batch()));
    }
    const auto step = coop_iteration(desc, gen, observed, cfg, state);
    result.reconstruction_error.push_back(step.reconstruction_error);
    result.value.push_back(step.value);
    if (cfg.on_iteration) cfg.on_iteration(t, step.reconstruction_error);
  }
  return result;
}

namespace {

template <typename T>
void require_latent_row(const GeneratorNet<T>& gen, const BasicTensor<T>& z, const char* what) {
  if (z.empty() || z.rank() != 2 || z.dim(0) != 1 || z.dim(1) != gen.latent_dim) {
    throw ShapeError(std::string(what) + " must be [1, " + std::to_string(gen.latent_dim) +
                     "], got " + shape_str(z.shape()));
  }
}

}  // namespace

template <typename T>
std::vector<BasicTensor<T>> interpolate(const GeneratorNet<T>& gen, const BasicTensor<T>& z1,
                                        const BasicTensor<T>& z2, std::size_t k) {
  if (k < 1) throw std::invalid_argument("interpolation needs at least one step");
  require_latent_row(gen, z1, "Z1");
  require_latent_row(gen, z2, "Z2");
  std::vector<BasicTensor<T>> out;
  for (std::size_t i = 0; i <= k; ++i) {
    BasicTensor<T> z;
    if (i == 0) {
      z = z1;
    } else if (i == k) {
      z = z2;
    } else {
      const T w = static_cast<T>(i) / static_cast<T>(k);
      z = BasicTensor<T>(z1.shape());
      for (std::size_t j = 0; j < z.size(); ++j) z[j] = (T(1) - w) * z1[j] + w * z2[j];
    }
    out.push_back(gen.generate(z, false, nullptr, Mode::Infer));
  }
  return out;
}

template <typename T>
BasicTensor<T> latent_arithmetic(const GeneratorNet<T>& gen, const BasicTensor<T>& za,
                                 const BasicTensor<T>& zb, const BasicTensor<T>& zc) {
  require_latent_row(gen, za, "Za");
  require_latent_row(gen, zb, "Zb");
  require_latent_row(gen, zc, "Zc");
  BasicTensor<T> z = za;
  z -= zb;
  z += zc;
  return gen.generate(z, false, nullptr, Mode::Infer);
}

#define DESCNET_INSTANTIATE_COOP(T)                                                              \
  template BasicTensor<T> sample_latent<T>(std::size_t, std::size_t, Rng&);                      \
  template CoopStep<T> coop_iteration(DescriptorNet<T>&, GeneratorNet<T>&, const BasicTensor<T>&, \
                                      const CoopConfig&, CoopState<T>&);                         \
  template CoopResult<T> train_coop(const BasicTensor<T>&, DescriptorNet<T>&, GeneratorNet<T>&,  \
                                    const CoopConfig&);                                          \
  template std::vector<BasicTensor<T>> interpolate(const GeneratorNet<T>&, const BasicTensor<T>&, \
                                                   const BasicTensor<T>&, std::size_t);          \
  template BasicTensor<T> latent_arithmetic(const GeneratorNet<T>&, const BasicTensor<T>&,       \
                                            const BasicTensor<T>&, const BasicTensor<T>&);

DESCNET_INSTANTIATE_COOP(float)
DESCNET_INSTANTIATE_COOP(double)

}  // namespace descnet
