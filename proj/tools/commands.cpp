#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli.hpp"
#include "descnet/checkpoint.hpp"
#include "descnet/classifier.hpp"
#include "descnet/coop.hpp"
#include "descnet/eval.hpp"
#include "descnet/formats.hpp"
#include "descnet/obj_export.hpp"
#include "descnet/presets.hpp"
#include "descnet/resample.hpp"
#include "descnet/synthetic.hpp"
#include "descnet/trainer.hpp"

namespace descnet::cli {

namespace {

using Json = nlohmann::ordered_json;

template <typename V>
CLI::Option* opt(CLI::App* app, const std::string& name, V& value, const std::string& help) {
  return app->add_option("--" + name, value, help)->capture_default_str();
}

void add_langevin(CLI::App* app, LangevinConfig& lc) {
  opt(app, "steps", lc.steps, "Langevin steps l per sampling call");
  opt(app, "step-size", lc.step_size, "Langevin step size");
  opt(app, "noise", lc.noise_enabled, "add the Gaussian noise term");
  opt(app, "temperature", lc.temperature, "sampling temperature (scales the drift only)");
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + '\n';
  return out;
}

std::vector<VoxelGrid> load_dataset(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--data is required");
  auto grids = load_grids(path);
  if (grids.empty()) throw std::invalid_argument("dataset '" + path + "' holds no grids");
  for (const auto& g : grids) {
    if (g.dims != grids.front().dims) throw ShapeError("dataset grids differ in size");
  }
  return grids;
}

int cubic_extent(const VoxelGrid& g) {
  if (g.dims[0] != g.dims[1] || g.dims[1] != g.dims[2]) {
    throw ShapeError("networks expect cubic grids");
  }
  return static_cast<int>(g.dims[0]);
}

Preprocessing parse_preprocessing(const std::string& name) {
  if (name == "none") return Preprocessing::None;
  if (name == "center") return Preprocessing::MeanCentered;
  if (name == "pm1") return Preprocessing::ScaledPm1;
  throw std::invalid_argument("unknown preprocessing '" + name + "' (none, center, pm1)");
}

/// Value in network space that corresponds to occupancy `v`.
float to_network_space(double v, const PreprocessingInfo& info) {
  switch (info.kind) {
    case Preprocessing::None: return static_cast<float>(v);
    case Preprocessing::MeanCentered: return static_cast<float>(v - info.mean);
    case Preprocessing::ScaledPm1: return static_cast<float>(2 * v - 1);
  }
  return static_cast<float>(v);
}

/// Binarized occupancy grids of a [N, 1, D, H, W] batch in network space.
std::vector<VoxelGrid> to_grids(const Tensor& states, const PreprocessingInfo& info, int label = -1) {
  const Tensor occ = unpreprocess(states, info);
  const Dims3 dims{states.dim(2), states.dim(3), states.dim(4)};
  std::vector<VoxelGrid> out;
  for (std::size_t n = 0; n < states.dim(0); ++n) {
    auto g = binarize(occ.item(n), dims);
    g.preprocessing = info;
    g.label = label;
    out.push_back(std::move(g));
  }
  return out;
}

struct DescriptorOptions {
  std::string preset = "synthesis3";
  std::string convs;
  float s = 0.5f;
  std::string reference = "gaussian";
  double init_std = 0.01;

  void bind(CLI::App* app) {
    opt(app, "preset", preset, "descriptor preset: synthesis3, superres2, coop4_descriptor or custom");
    opt(app, "convs", convs, "custom conv stack filters:kernel:stride,... (preset=custom)");
    opt(app, "s", s, "reference standard deviation s");
    opt(app, "reference", reference, "reference distribution: gaussian or uniform");
    opt(app, "init-std", init_std, "std of the initial conv/FC kernels");
  }

  DescriptorNet<float> build(int grid, Rng& rng) const {
    DescriptorArchitecture arch;
    if (preset == "custom") {
      arch.grid = grid;
      arch.convs = parse_conv_specs(convs);
    } else {
      arch = descriptor_architecture(parse_preset_name(preset), grid);
    }
    auto net = build_descriptor<float>(arch);
    net.s = s;
    if (reference == "uniform") {
      net.reference = ReferenceKind::Uniform;
    } else if (reference != "gaussian") {
      throw std::invalid_argument("unknown reference '" + reference + "'");
    }
    init_weights(net.layers, init_std, rng);
    net.validate();
    return net;
  }
};

// ---------------------------------------------------------------------------

struct MakeDataOptions {
  std::string families = "cuboid";
  std::size_t count = 100;
  std::size_t grid = 16;
  std::size_t min_extent = 5;
  std::size_t max_extent = 10;
  bool centered = false;
  std::string preprocess = "center";
  std::string binvox;
  int label = -1;
  std::uint64_t seed = 0;
};

}  // namespace

Command add_make_data(CLI::App& root) {
  auto o = std::make_shared<MakeDataOptions>();
  CLI::App* app = root.add_subcommand("make-data", "generate a synthetic dataset or convert binvox files");
  opt(app, "families", o->families, "comma-separated shape families (cuboid, ellipsoid, lbracket)");
  opt(app, "count", o->count, "shapes per family");
  opt(app, "grid", o->grid, "grid extent");
  opt(app, "min-extent", o->min_extent, "smallest shape extent per axis");
  opt(app, "max-extent", o->max_extent, "largest shape extent per axis");
  opt(app, "centered", o->centered, "center every shape in the grid");
  opt(app, "preprocess", o->preprocess, "stored preprocessing: center, pm1 or none");
  opt(app, "binvox", o->binvox, "comma-separated binvox files to convert instead of generating");
  opt(app, "label", o->label, "label for converted binvox grids");
  opt(app, "seed", o->seed, "random seed");
  return {app, [o](const Context& ctx) {
            std::vector<VoxelGrid> grids;
            if (!o->binvox.empty()) {
              std::stringstream ss(o->binvox);
              std::string path;
              while (std::getline(ss, path, ',')) {
                auto g = read_binvox(read_file_bytes(path));
                g.label = o->label;
                grids.push_back(std::move(g));
              }
            } else {
              Rng rng(o->seed);
              std::stringstream ss(o->families);
              std::string name;
              while (std::getline(ss, name, ',')) {
                SyntheticShapeSpec spec{parse_shape_family(name), o->grid, o->min_extent,
                                        o->max_extent, o->centered};
                auto part = make_synthetic_dataset(spec, o->count, rng);
                grids.insert(grids.end(), part.begin(), part.end());
              }
            }
            PreprocessingInfo info{parse_preprocessing(o->preprocess), 0.0f};
            if (info.kind == Preprocessing::MeanCentered) info.mean = dataset_mean(grids);
            for (auto& g : grids) g.preprocessing = info;
            save_grids(ctx.out_dir / "data.vox", grids);
            ctx.progress("make-data: wrote " + std::to_string(grids.size()) + " grids");
          }};
}

namespace {

struct TrainOptions {
  std::string data;
  DescriptorOptions desc;
  TrainConfig train;
  std::string mode = "unconditional";
  std::size_t noise_off_after = 0;  // 0 keeps the noise on throughout
};

}  // namespace

Command add_train(CLI::App& root) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* app = root.add_subcommand("train", "train a descriptor by alternating sampling and learning");
  opt(app, "data", o->data, "training grids (VOX1)");
  o->desc.bind(app);
  auto& t = o->train;
  opt(app, "iterations", t.iterations, "learning iterations T");
  opt(app, "batch-size", t.batch_size, "observed items per iteration");
  opt(app, "chains", t.chain_count, "persistent chains (unconditional mode)");
  opt(app, "learning-rate", t.adam.learning_rate, "Adam learning rate");
  opt(app, "beta1", t.adam.beta1, "Adam beta1");
  opt(app, "beta2", t.adam.beta2, "Adam beta2");
  add_langevin(app, t.langevin);
  opt(app, "noise-off-after", o->noise_off_after, "disable Langevin noise from this iteration on (0: never)");
  opt(app, "mode", o->mode, "unconditional, masked or projected");
  opt(app, "corrupt-fraction", t.corrupt_fraction, "corrupted voxel fraction (masked mode)");
  opt(app, "down-factor", t.down_factor, "block size of the down-scaling operator (projected mode)");
  opt(app, "fill-std", t.fill.stddev, "std of the corruption fill (masked mode)");
  opt(app, "init-from-data", t.init_from_data, "start chains at training items instead of N(0, s^2)");
  opt(app, "seed", t.seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto grids = load_dataset(o->data);
            const auto info = grids.front().preprocessing;
            const Tensor data = preprocess_batch(grids);
            Rng init_rng = Rng::derive(o->train.seed, 0x1417);
            auto net = o->desc.build(cubic_extent(grids.front()), init_rng);

            TrainConfig cfg = o->train;
            cfg.mode = parse_train_mode(o->mode);
            cfg.noise_off_after = o->noise_off_after == 0 ? kNoiseAlwaysOn : o->noise_off_after;
            cfg.fill.mean = to_network_space(dataset_mean(grids), info);
            std::vector<std::string> log;
            cfg.on_iteration = [&](const IterationRecord& r) {
              log.push_back(to_json_line(r));
              if ((r.iteration + 1) % ctx.progress_every == 0 || r.iteration + 1 == cfg.iterations) {
                std::ostringstream line;
                line << "train: iteration " << r.iteration + 1 << "/" << cfg.iterations << " V=" << r.value;
                ctx.progress(line.str());
              }
            };
            if (cfg.mode == TrainMode::Unconditional) {
              const auto result = train_descriptor(data, net, cfg);
              save_tensor(ctx.out_dir / "chains.vox", TensorRecord{result.chains.states, info, -1});
              save_grids(ctx.out_dir / "samples.vox", to_grids(result.chains.states, info));
            } else {
              train_conditional(data, net, cfg);
            }
            save_checkpoint(ctx.out_dir / "descriptor.ckpt", net);
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(log));
          }};
}

namespace {

struct CoopOptions {
  std::string data;
  DescriptorOptions desc = [] {
    DescriptorOptions d;
    d.preset = "coop4_descriptor";
    return d;
  }();
  std::string generator = "coop_generator";
  std::size_t latent_dim = 100;
  int stem_channels = 256;
  int base_extent = 4;
  std::string deconvs;
  float sigma = 0.3f;
  double generator_init_std = 0.02;
  CoopConfig coop;
  std::size_t samples = 16;
};

}  // namespace

Command add_coop(CLI::App& root) {
  auto o = std::make_shared<CoopOptions>();
  CLI::App* app = root.add_subcommand("coop", "cooperative training of a descriptor and a generator");
  opt(app, "data", o->data, "training grids (VOX1, pm1 preprocessing recommended)");
  o->desc.bind(app);
  opt(app, "generator", o->generator, "generator preset: coop_generator or custom");
  opt(app, "latent-dim", o->latent_dim, "latent width (generator=custom)");
  opt(app, "stem-channels", o->stem_channels, "channels of the FC stem (generator=custom)");
  opt(app, "base-extent", o->base_extent, "spatial extent of the FC stem (generator=custom)");
  opt(app, "deconvs", o->deconvs, "deconv stack channels:kernel:upsample,... (generator=custom)");
  opt(app, "sigma", o->sigma, "generator noise sigma (used with init-noise)");
  opt(app, "generator-init-std", o->generator_init_std, "std of the initial generator kernels");
  auto& c = o->coop;
  opt(app, "iterations", c.iterations, "learning iterations");
  opt(app, "batch-size", c.batch_size, "observed items per iteration");
  opt(app, "chains", c.chain_count, "chains (latent vectors) per iteration");
  opt(app, "learning-rate", c.descriptor_adam.learning_rate, "descriptor Adam learning rate");
  opt(app, "beta1", c.descriptor_adam.beta1, "descriptor Adam beta1");
  opt(app, "generator-learning-rate", c.generator_adam.learning_rate, "generator Adam learning rate");
  opt(app, "generator-beta1", c.generator_adam.beta1, "generator Adam beta1");
  add_langevin(app, c.langevin);
  opt(app, "init-noise", c.init_noise, "add N(0, sigma^2) to g(Z) when initialising chains");
  opt(app, "samples", o->samples, "generator samples written after training");
  opt(app, "seed", c.seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto grids = load_dataset(o->data);
            const auto info = grids.front().preprocessing;
            const Tensor data = preprocess_batch(grids);
            const int grid = cubic_extent(grids.front());
            Rng desc_rng = Rng::derive(o->coop.seed, 0x1417);
            auto desc = o->desc.build(grid, desc_rng);
            GeneratorArchitecture arch;
            if (o->generator == "custom") {
              arch.latent_dim = o->latent_dim;
              arch.stem_channels = o->stem_channels;
              arch.base_extent = o->base_extent;
              arch.deconvs = parse_deconv_specs(o->deconvs);
            } else {
              arch = generator_architecture(parse_preset_name(o->generator), grid);
            }
            auto gen = build_generator<float>(arch);
            gen.sigma = o->sigma;
            Rng gen_rng = Rng::derive(o->coop.seed, 0x9e4);
            init_weights(gen.layers, o->generator_init_std, gen_rng);

            CoopConfig cfg = o->coop;
            cfg.on_iteration = [&](std::size_t t, double recon) {
              if ((t + 1) % ctx.progress_every == 0 || t + 1 == cfg.iterations) {
                std::ostringstream line;
                line << "coop: iteration " << t + 1 << "/" << cfg.iterations
                     << " reconstruction=" << recon;
                ctx.progress(line.str());
              }
            };
            const auto result = train_coop(data, desc, gen, cfg);
            std::vector<std::string> log;
            for (std::size_t t = 0; t < result.value.size(); ++t) {
              Json j;
              j["iteration"] = t;
              j["reconstruction_error"] = result.reconstruction_error[t];
              j["V"] = result.value[t];
              log.push_back(j.dump());
            }
            Rng sample_rng = Rng::derive(o->coop.seed, 0x5a);
            const auto z = sample_latent<float>(o->samples, gen.latent_dim, sample_rng);
            const auto y = gen.generate(z, false, nullptr, Mode::Infer);
            save_checkpoint(ctx.out_dir / "descriptor.ckpt", desc);
            save_checkpoint(ctx.out_dir / "generator.ckpt", gen);
            save_grids(ctx.out_dir / "samples.vox", to_grids(y, info));
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(log));
          }};
}

namespace {

struct SampleOptions {
  std::string checkpoint;
  std::string data;
  std::string init = "gaussian";
  std::size_t count = 16;
  LangevinConfig langevin;
  std::string preprocess = "center";
  float mean = 0.0f;
  std::uint64_t seed = 0;
};

/// Preprocessing record: the data's when a dataset is given, else the flags'.
PreprocessingInfo resolve_info(const std::vector<VoxelGrid>& grids, const std::string& kind, float mean) {
  if (!grids.empty()) return grids.front().preprocessing;
  return {parse_preprocessing(kind), mean};
}

}  // namespace

Command add_sample(CLI::App& root) {
  auto o = std::make_shared<SampleOptions>();
  CLI::App* app = root.add_subcommand("sample", "run Langevin chains of a trained descriptor");
  opt(app, "checkpoint", o->checkpoint, "descriptor checkpoint");
  opt(app, "data", o->data, "grids for init=data and for the preprocessing record");
  opt(app, "init", o->init, "chain initialisation: gaussian (N(0, s^2)) or data");
  opt(app, "count", o->count, "number of chains");
  add_langevin(app, o->langevin);
  opt(app, "preprocess", o->preprocess, "preprocessing of the net's input space when no data is given");
  opt(app, "mean", o->mean, "dataset mean for preprocess=center when no data is given");
  opt(app, "seed", o->seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto net = load_descriptor(o->checkpoint);
            std::vector<VoxelGrid> grids;
            if (!o->data.empty()) grids = load_dataset(o->data);
            const auto info = resolve_info(grids, o->preprocess, o->mean);
            ChainSet<float> chains;
            if (o->init == "gaussian") {
              chains = init_chains(net, o->count, o->seed);
            } else if (o->init == "data") {
              if (grids.empty()) throw std::invalid_argument("init=data needs --data");
              chains = init_chains_from_data(preprocess_batch(grids), o->count, o->seed);
            } else {
              throw std::invalid_argument("unknown init '" + o->init + "'");
            }
            run_chain(net, chains, o->langevin);
            save_tensor(ctx.out_dir / "chains.vox", TensorRecord{chains.states, info, -1});
            save_grids(ctx.out_dir / "samples.vox", to_grids(chains.states, info));
            ctx.progress("sample: wrote " + std::to_string(chains.size()) + " chains");
          }};
}

namespace {

struct RecoverOptions {
  std::string checkpoint;
  std::string data;
  double fraction = 0.7;
  LangevinConfig langevin{90, 0.07, true, 1.0};
  float fill_std = -1.0f;
  std::uint64_t seed = 0;
};

}  // namespace

Command add_recover(CLI::App& root) {
  auto o = std::make_shared<RecoverOptions>();
  CLI::App* app = root.add_subcommand("recover", "corrupt grids and recover them by masked sampling");
  opt(app, "checkpoint", o->checkpoint, "descriptor checkpoint");
  opt(app, "data", o->data, "grids to corrupt and recover");
  opt(app, "fraction", o->fraction, "corrupted voxel fraction");
  add_langevin(app, o->langevin);
  opt(app, "fill-std", o->fill_std, "std of the corruption fill (negative: the net's s)");
  opt(app, "seed", o->seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto net = load_descriptor(o->checkpoint);
            const auto grids = load_dataset(o->data);
            const auto info = grids.front().preprocessing;
            const Tensor items = preprocess_batch(grids);
            const double mean = dataset_mean(grids);
            const CorruptionFill fill{to_network_space(mean, info), o->fill_std < 0 ? net.s : o->fill_std};
            Rng corrupt_rng = Rng::derive(o->seed, 0xc0);
            Tensor corrupted(items.shape());
            std::vector<CorruptionMask> masks;
            for (std::size_t n = 0; n < items.dim(0); ++n) {
              auto c = corrupt(items.item_tensor(n), o->fraction, corrupt_rng, fill);
              corrupted.set_item(n, c.values.span());
              masks.push_back(std::move(c.mask));
            }
            const auto recovered = recover(net, corrupted, std::span<const CorruptionMask>(masks),
                                           o->langevin, o->seed);
            const auto out = to_grids(recovered, info);
            std::vector<std::string> log;
            std::vector<VoxelGrid> mask_grids;
            double total = 0, baseline_total = 0;
            const bool baseline_occupied = mean >= 0.5;
            for (std::size_t n = 0; n < grids.size(); ++n) {
              VoxelGrid baseline = grids[n];
              for (std::size_t i = 0; i < baseline.size(); ++i) {
                if (masks[n].cells[i]) baseline.occupancy[i] = baseline_occupied;
              }
              const double err = recovery_error(grids[n], out[n], masks[n]);
              const double base = recovery_error(grids[n], baseline, masks[n]);
              total += err;
              baseline_total += base;
              Json j;
              j["index"] = n;
              j["recovery_error"] = err;
              j["baseline_error"] = base;
              log.push_back(j.dump());
              mask_grids.push_back(mask_grid(masks[n], grids[n].dims));
            }
            const auto count = static_cast<double>(grids.size());
            log.push_back(to_json_line(MetricRecord{"recovery_error", "", total / count, 0, grids.size()}));
            log.push_back(to_json_line(
                MetricRecord{"baseline_recovery_error", "", baseline_total / count, 0, grids.size()}));
            save_grids(ctx.out_dir / "recovered.vox", out);
            save_grids(ctx.out_dir / "masks.vox", mask_grids);
            save_grids(ctx.out_dir / "corrupted.vox", to_grids(corrupted, info));
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(log));
            std::ostringstream line;
            line << "recover: mean recovery error " << total / count << " (baseline "
                 << baseline_total / count << ")";
            ctx.progress(line.str());
          }};
}

namespace {

struct SuperresOptions {
  std::string checkpoint;
  std::string data;
  int factor = 2;
  LangevinConfig langevin{20, 0.1, true, 1.0};
  std::uint64_t seed = 0;
};

double mismatch(const VoxelGrid& a, const VoxelGrid& b) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a.occupancy[i] != b.occupancy[i];
  return a.size() ? static_cast<double>(diff) / static_cast<double>(a.size()) : 0.0;
}

}  // namespace

Command add_superres(CLI::App& root) {
  auto o = std::make_shared<SuperresOptions>();
  CLI::App* app = root.add_subcommand("superres", "down-scale grids and restore them by projected sampling");
  opt(app, "checkpoint", o->checkpoint, "descriptor checkpoint trained at the high resolution");
  opt(app, "data", o->data, "high-resolution grids");
  opt(app, "factor", o->factor, "down-scaling block size d");
  add_langevin(app, o->langevin);
  opt(app, "seed", o->seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto net = load_descriptor(o->checkpoint);
            const auto grids = load_dataset(o->data);
            const auto info = grids.front().preprocessing;
            const Tensor high = preprocess_batch(grids);
            const Tensor low = downscale(high, o->factor);
            const Tensor restored = super_resolve(net, low, o->factor, o->langevin, o->seed);
            const auto out = to_grids(restored, info);
            const auto baseline = to_grids(upscale(low, o->factor), info);
            std::vector<std::string> log;
            double total = 0, baseline_total = 0;
            for (std::size_t n = 0; n < grids.size(); ++n) {
              Json j;
              j["index"] = n;
              j["voxel_error"] = mismatch(grids[n], out[n]);
              j["baseline_error"] = mismatch(grids[n], baseline[n]);
              total += mismatch(grids[n], out[n]);
              baseline_total += mismatch(grids[n], baseline[n]);
              log.push_back(j.dump());
            }
            const auto count = static_cast<double>(grids.size());
            log.push_back(to_json_line(MetricRecord{"superres_voxel_error", "", total / count, 0, grids.size()}));
            log.push_back(
                to_json_line(MetricRecord{"upscale_voxel_error", "", baseline_total / count, 0, grids.size()}));
            log.push_back(to_json_line(
                MetricRecord{"block_mean_drift", "", max_abs_diff(downscale(restored, o->factor), low), 0,
                             grids.size()}));
            save_grids(ctx.out_dir / "superres.vox", out);
            save_tensor(ctx.out_dir / "lowres.vox", TensorRecord{low, info, -1});
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(log));
            ctx.progress("superres: restored " + std::to_string(grids.size()) + " grids");
          }};
}

namespace {

struct LatentOptions {
  std::string generator;
  std::size_t k = 8;
  std::string preprocess = "pm1";
  float mean = 0.0f;
  std::uint64_t seed = 0;
};

void bind_latent(CLI::App* app, LatentOptions& o) {
  opt(app, "generator", o.generator, "generator checkpoint");
  opt(app, "preprocess", o.preprocess, "preprocessing of the generator's output space");
  opt(app, "mean", o.mean, "dataset mean for preprocess=center");
  opt(app, "seed", o.seed, "random seed for the latent vectors");
}

BasicTensor<float> row(const BasicTensor<float>& z, std::size_t i) {
  return BasicTensor<float>({1, z.dim(1)}, std::vector<float>(z.item(i).begin(), z.item(i).end()));
}

}  // namespace

Command add_interpolate(CLI::App& root) {
  auto o = std::make_shared<LatentOptions>();
  CLI::App* app = root.add_subcommand("interpolate", "generate along a segment between two latent vectors");
  bind_latent(app, *o);
  opt(app, "k", o->k, "number of segments; k + 1 shapes are written");
  return {app, [o](const Context& ctx) {
            const auto gen = load_generator(o->generator);
            Rng rng(o->seed);
            const auto z = sample_latent<float>(2, gen.latent_dim, rng);
            const auto path = interpolate(gen, row(z, 0), row(z, 1), o->k);
            const PreprocessingInfo info{parse_preprocessing(o->preprocess), o->mean};
            const Tensor batch = Tensor::concat(path);
            save_tensor(ctx.out_dir / "latents.vox", TensorRecord{z, {}, -1});
            save_tensor(ctx.out_dir / "path.vox", TensorRecord{batch, info, -1});
            save_grids(ctx.out_dir / "interpolation.vox", to_grids(batch, info));
            ctx.progress("interpolate: wrote " + std::to_string(path.size()) + " shapes");
          }};
}

Command add_arith(CLI::App& root) {
  auto o = std::make_shared<LatentOptions>();
  CLI::App* app = root.add_subcommand("arith", "generate g(Za - Zb + Zc)");
  bind_latent(app, *o);
  return {app, [o](const Context& ctx) {
            const auto gen = load_generator(o->generator);
            Rng rng(o->seed);
            const auto z = sample_latent<float>(3, gen.latent_dim, rng);
            const auto result = latent_arithmetic(gen, row(z, 0), row(z, 1), row(z, 2));
            const auto operands = gen.generate(z, false, nullptr, Mode::Infer);
            const Tensor parts[] = {operands, result};
            const Tensor batch = Tensor::concat(parts);
            const PreprocessingInfo info{parse_preprocessing(o->preprocess), o->mean};
            save_tensor(ctx.out_dir / "latents.vox", TensorRecord{z, {}, -1});
            save_grids(ctx.out_dir / "arith.vox", to_grids(batch, info));
            ctx.progress("arith: wrote g(Za), g(Zb), g(Zc) and g(Za - Zb + Zc)");
          }};
}

namespace {

struct FeatureOptions {
  std::string checkpoint;
  std::string data;
  std::string preset = "synthesis3";
  double init_std = 0.01;
  FeatureConfig pools;
  std::uint64_t seed = 0;
};

}  // namespace

Command add_features(CLI::App& root) {
  auto o = std::make_shared<FeatureOptions>();
  CLI::App* app = root.add_subcommand("features", "extract pooled first/second-layer descriptor features");
  opt(app, "checkpoint", o->checkpoint, "descriptor checkpoint (empty: randomly initialised preset)");
  opt(app, "data", o->data, "grids to describe");
  opt(app, "preset", o->preset, "preset used when no checkpoint is given");
  opt(app, "init-std", o->init_std, "kernel std of the random preset");
  opt(app, "pool1", o->pools.pool1, "max-pool window on the first conv layer");
  opt(app, "pool2", o->pools.pool2, "max-pool window on the second conv layer");
  opt(app, "seed", o->seed, "random seed for the preset initialisation");
  return {app, [o](const Context& ctx) {
            const auto grids = load_dataset(o->data);
            DescriptorNet<float> net;
            if (!o->checkpoint.empty()) {
              net = load_descriptor(o->checkpoint);
            } else {
              net = build_descriptor<float>(
                  descriptor_architecture(parse_preset_name(o->preset), cubic_extent(grids.front())));
              Rng rng(o->seed);
              init_weights(net.layers, o->init_std, rng);
            }
            const Tensor f = extract_features(net, preprocess_batch(grids), o->pools);
            std::vector<VoxRecord> records;
            for (std::size_t n = 0; n < grids.size(); ++n) {
              records.emplace_back(TensorRecord{row(f, n), {}, grids[n].label});
            }
            write_file_atomic(ctx.out_dir / "features.vox", write_native(records));
            ctx.progress("features: " + std::to_string(grids.size()) + " x " + std::to_string(f.dim(1)));
          }};
}

namespace {

struct ClassifyOptions {
  std::string train;
  std::string test;
  LogisticConfig logistic;
};

std::pair<Tensor, std::vector<int>> load_features(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("feature file path is empty");
  const auto records = read_native(read_file_bytes(path));
  if (records.empty()) throw std::invalid_argument("feature file '" + path + "' is empty");
  std::vector<Tensor> rows;
  std::vector<int> labels;
  for (const auto& r : records) {
    const auto* t = std::get_if<TensorRecord>(&r);
    if (!t || t->tensor.rank() != 2 || t->tensor.dim(0) != 1) {
      throw FormatError("feature file '" + path + "' must hold [1, F] float records");
    }
    rows.push_back(t->tensor);
    labels.push_back(t->label);
  }
  return {Tensor::concat(rows), labels};
}

}  // namespace

Command add_classify(CLI::App& root) {
  auto o = std::make_shared<ClassifyOptions>();
  CLI::App* app = root.add_subcommand("classify", "fit logistic regression on features and classify");
  opt(app, "train", o->train, "training features (from the features command)");
  opt(app, "test", o->test, "held-out features");
  opt(app, "l2", o->logistic.l2, "L2 penalty");
  opt(app, "iterations", o->logistic.steps, "gradient steps");
  opt(app, "learning-rate", o->logistic.learning_rate, "gradient step size");
  opt(app, "one-vs-all", o->logistic.one_vs_all, "fit K binary models instead of one softmax model");
  opt(app, "standardize", o->logistic.standardize, "standardise features on the training set");
  return {app, [o](const Context& ctx) {
            const auto [xtr, ytr] = load_features(o->train);
            const auto [xte, yte] = load_features(o->test);
            const auto model = train_logistic(xtr, ytr, o->logistic);
            const auto ptr = classify_one_vs_all(model, xtr);
            const auto pte = classify_one_vs_all(model, xte);
            std::vector<std::string> lines;
            for (std::size_t i = 0; i < pte.size(); ++i) {
              Json j;
              j["index"] = i;
              j["label"] = yte[i];
              j["predicted"] = pte[i];
              lines.push_back(j.dump());
            }
            write_file_atomic(ctx.out_dir / "predictions.jsonl", join_lines(lines));
            const std::vector<std::string> metrics{
                to_json_line(MetricRecord{"train_accuracy", "", accuracy(ptr, ytr), 0, ytr.size()}),
                to_json_line(MetricRecord{"test_accuracy", "", accuracy(pte, yte), 0, yte.size()})};
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(metrics));
            ctx.progress("classify: test accuracy " + std::to_string(accuracy(pte, yte)));
          }};
}

namespace {

struct EvalOptions {
  std::string samples;
  std::string reference;
  int category = -1;
  std::size_t neighbors = 1;
  ClassifierTrainConfig classifier;
};

}  // namespace

Command add_eval(CLI::App& root) {
  auto o = std::make_shared<EvalOptions>();
  CLI::App* app = root.add_subcommand("eval", "score synthesized grids against a labeled reference set");
  opt(app, "samples", o->samples, "synthesized grids");
  opt(app, "reference", o->reference, "labeled grids used to train the reference classifier");
  opt(app, "category", o->category, "class of the samples for avg_softmax_prob (-1: skip)");
  opt(app, "neighbors", o->neighbors, "nearest training neighbors reported per sample");
  opt(app, "classifier-iterations", o->classifier.iterations, "reference classifier Adam iterations");
  opt(app, "classifier-batch", o->classifier.batch_size, "reference classifier batch size");
  opt(app, "classifier-learning-rate", o->classifier.adam.learning_rate, "reference classifier learning rate");
  opt(app, "seed", o->classifier.seed, "random seed");
  return {app, [o](const Context& ctx) {
            const auto reference = load_dataset(o->reference);
            auto samples = load_dataset(o->samples);
            if (samples.front().dims != reference.front().dims) {
              throw ShapeError("samples and reference grids differ in size");
            }
            std::vector<int> labels;
            int classes = 0;
            for (const auto& g : reference) {
              if (g.label < 0) throw std::invalid_argument("reference grids must be labeled");
              labels.push_back(g.label);
              classes = std::max(classes, g.label + 1);
            }
            // Samples are scored in the reference set's input space.
            for (auto& g : samples) g.preprocessing = reference.front().preprocessing;
            const Tensor ref = preprocess_batch(reference);
            const Tensor smp = preprocess_batch(samples);
            Rng rng = Rng::derive(o->classifier.seed, 0xc1);
            auto clf = make_reference_classifier(static_cast<std::size_t>(cubic_extent(reference.front())),
                                                 static_cast<std::size_t>(classes), rng);
            train_reference_classifier(clf, ref, labels, o->classifier);
            const double train_acc = accuracy(clf.predict(ref), labels);
            const Tensor64 probs = clf.probabilities(smp);
            std::vector<std::string> metrics{
                to_json_line(MetricRecord{"reference_train_accuracy", "", train_acc, 0, labels.size()}),
                to_json_line(MetricRecord{"inception_score", "", inception_score(probs), 0, samples.size()})};
            if (o->category >= 0) {
              metrics.push_back(to_json_line(MetricRecord{"avg_softmax_prob", std::to_string(o->category),
                                                          avg_softmax_prob(probs, static_cast<std::size_t>(o->category)),
                                                          0, samples.size()}));
            }
            write_file_atomic(ctx.out_dir / "metrics.jsonl", join_lines(metrics));

            std::vector<Tensor> raw_ref;
            for (const auto& g : reference) raw_ref.push_back(to_tensor(g));
            const Tensor train_raw = Tensor::concat(raw_ref);
            const std::size_t k = std::min(o->neighbors, reference.size());
            std::vector<std::string> nn;
            for (std::size_t n = 0; n < samples.size(); ++n) {
              const Tensor q = to_tensor(samples[n]);
              Json j;
              j["index"] = n;
              j["neighbors"] = nearest_neighbor(q.span(), train_raw, k);
              nn.push_back(j.dump());
            }
            write_file_atomic(ctx.out_dir / "neighbors.jsonl", join_lines(nn));
            ctx.progress("eval: inception score " + std::to_string(inception_score(probs)));
          }};
}

namespace {

struct ExportOptions {
  std::string input;
  long index = -1;
};

}  // namespace

Command add_export_obj(CLI::App& root) {
  auto o = std::make_shared<ExportOptions>();
  CLI::App* app = root.add_subcommand("export-obj", "write grids as face-culled cube meshes");
  opt(app, "input", o->input, "grids (VOX1) or a single binvox file");
  opt(app, "index", o->index, "grid to export (-1: all, as shape_<i>.obj)");
  return {app, [o](const Context& ctx) {
            if (o->input.empty()) throw std::invalid_argument("--input is required");
            std::vector<VoxelGrid> grids;
            const auto ext = std::filesystem::path(o->input).extension();
            if (ext == ".binvox") {
              grids.push_back(read_binvox(read_file_bytes(o->input)));
            } else {
              grids = load_grids(o->input);
            }
            auto write_one = [&](std::size_t i, const std::filesystem::path& path) {
              const auto stats = export_obj(path, grids.at(i));
              ctx.progress("export-obj: " + path.filename().string() + " " + std::to_string(stats.vertices) +
                           " vertices, " + std::to_string(stats.triangles) + " triangles");
            };
            if (o->index >= 0) {
              if (static_cast<std::size_t>(o->index) >= grids.size()) {
                throw std::out_of_range("grid index " + std::to_string(o->index) + " out of range");
              }
              write_one(static_cast<std::size_t>(o->index), ctx.out_dir / "shape.obj");
            } else {
              for (std::size_t i = 0; i < grids.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "shape_%03zu.obj", i);
                write_one(i, ctx.out_dir / name);
              }
            }
          }};
}

}  // namespace descnet::cli
