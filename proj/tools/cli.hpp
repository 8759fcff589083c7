#pragma once

// Command-line front end. Every command reads its settings from flags and/or a
// flat `key=value` config file (`--config FILE`, keys are the long flag names
// without dashes; flags given on the command line win), writes its outputs into
// `--out-dir`, and echoes the fully resolved settings to `<out-dir>/config.txt`
// so the run can be repeated with `--config <out-dir>/config.txt`.
//
// Failures print one JSON object on stderr,
//   {"error":"<message>","kind":"<category>","command":"<name>"}
// and return a nonzero exit code (2 for usage errors, 1 otherwise).

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace descnet::cli {

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses a flat config file into ordered (key, value) pairs. Lines starting
/// with `#` are comments; values may be wrapped in double quotes.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

/// Resolved `key=value` lines for every option of `command` except --config.
std::string echo_config(const CLI::App& command);

struct Context {
  std::filesystem::path out_dir;
  bool quiet = false;
  std::size_t progress_every = 10;
  std::ostream* err = nullptr;

  void progress(const std::string& line) const;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void(const Context&)> run;
};

// Registration functions, one per command (commands.cpp).
Command add_make_data(CLI::App& root);
Command add_train(CLI::App& root);
Command add_coop(CLI::App& root);
Command add_sample(CLI::App& root);
Command add_recover(CLI::App& root);
Command add_superres(CLI::App& root);
Command add_interpolate(CLI::App& root);
Command add_arith(CLI::App& root);
Command add_features(CLI::App& root);
Command add_classify(CLI::App& root);
Command add_eval(CLI::App& root);
Command add_export_obj(CLI::App& root);

}  // namespace descnet::cli
