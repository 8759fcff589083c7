#pragma once

// In-process CLI runs shared by the CLI tests and the acceptance binary.

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli.hpp"

namespace cli_pipeline {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out, err;
};

inline Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.push_back("--quiet");
  args.push_back("1");
  Outcome o;
  o.code = descnet::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

/// Runs a command and throws with its error record when it fails.
inline void checked(const std::vector<std::string>& args) {
  const auto o = run_cli(args);
  if (o.code != 0) throw std::runtime_error(args.front() + " failed: " + o.err);
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string str(const fs::path& p) { return p.string(); }

/// Two-family 8^3 dataset in `dir/data` and a briefly trained two-conv
/// descriptor in `dir/train`.
inline void prepare(const fs::path& dir) {
  checked({"make-data", "--families", "cuboid,ellipsoid", "--count", "6", "--grid", "8", "--min-extent", "3",
           "--max-extent", "6", "--seed", "3", "--out-dir", str(dir / "data")});
  checked({"train", "--data", str(dir / "data/data.vox"), "--preset", "custom", "--convs", "4:3:2,3:3:1",
           "--iterations", "4", "--batch-size", "4", "--chains", "4", "--steps", "3", "--seed", "5", "--out-dir",
           str(dir / "train")});
}

/// Every command once, on small settings, writing under `root`.
inline void pipeline(const fs::path& data, const fs::path& ckpt, const fs::path& root) {
  const auto out = [&](const char* name) { return str(root / name); };
  checked({"make-data", "--families", "lbracket", "--count", "3", "--grid", "8", "--min-extent", "3",
           "--max-extent", "6", "--seed", "8", "--out-dir", out("make-data")});
  checked({"train", "--data", str(data), "--preset", "custom", "--convs", "4:3:2", "--iterations", "3",
           "--batch-size", "4", "--chains", "4", "--steps", "3", "--seed", "9", "--out-dir", out("train")});
  checked({"train", "--data", str(data), "--preset", "custom", "--convs", "4:3:2", "--iterations", "2",
           "--batch-size", "4", "--steps", "3", "--mode", "masked", "--seed", "9", "--out-dir", out("masked")});
  checked({"train", "--data", str(data), "--preset", "custom", "--convs", "4:3:2", "--iterations", "2",
           "--batch-size", "4", "--steps", "3", "--mode", "projected", "--seed", "9", "--out-dir",
           out("projected")});
  checked({"sample", "--checkpoint", str(ckpt), "--count", "3", "--steps", "4", "--seed", "2", "--data", str(data),
           "--out-dir", out("sample")});
  checked({"recover", "--checkpoint", str(ckpt), "--data", str(data), "--steps", "4", "--seed", "2", "--out-dir",
           out("recover")});
  checked({"superres", "--checkpoint", str(ckpt), "--data", str(data), "--steps", "4", "--seed", "2", "--out-dir",
           out("superres")});
  checked({"coop", "--data", str(data), "--preset", "custom", "--convs", "4:3:2", "--generator", "custom",
           "--latent-dim", "3", "--stem-channels", "2", "--base-extent", "2", "--deconvs", "2:4:2,1:4:2",
           "--iterations", "3", "--batch-size", "4", "--chains", "4", "--steps", "2", "--seed", "4", "--out-dir",
           out("coop")});
  const auto gen = str(root / "coop/generator.ckpt");
  checked({"interpolate", "--generator", gen, "--k", "3", "--seed", "1", "--out-dir", out("interpolate")});
  checked({"arith", "--generator", gen, "--seed", "1", "--out-dir", out("arith")});
  checked({"features", "--checkpoint", str(ckpt), "--data", str(data), "--out-dir", out("features")});
  const auto feats = str(root / "features/features.vox");
  checked({"classify", "--train", feats, "--test", feats, "--iterations", "50", "--out-dir", out("classify")});
  checked({"eval", "--samples", str(root / "train/samples.vox"), "--reference", str(data), "--category", "0",
           "--classifier-iterations", "5", "--classifier-batch", "4", "--seed", "3", "--out-dir", out("eval")});
  checked({"export-obj", "--input", str(root / "train/samples.vox"), "--out-dir", out("export-obj")});
}

/// Relative path -> contents of every output file except the config echo
/// (which names the output directory), with wall-clock timings removed.
inline std::map<std::string, std::string> outputs(const fs::path& root) {
  static const std::regex wall(R"("wall_time":[^,}]*,?)");
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "config.txt") continue;
    std::string text = slurp(e.path());
    if (e.path().extension() == ".jsonl") text = std::regex_replace(text, wall, "");
    files[fs::relative(e.path(), root).string()] = text;
  }
  return files;
}

}  // namespace cli_pipeline
