#include "cli.hpp"

#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "descnet/byte_io.hpp"
#include "descnet/tensor.hpp"

namespace descnet::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Splices the config file of the selected command in front of its flags, so
/// that flags parsed later take precedence (options use the TakeLast policy).
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& root) {
  std::size_t cmd = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      try {
        static_cast<void>(root.get_subcommand(args[i]));
        cmd = i;
      } catch (const CLI::OptionNotFound&) {
      }
      break;
    }
  }
  if (cmd == args.size()) return args;
  std::string path;
  for (std::size_t i = cmd + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(cmd) + 1);
  for (const auto& [key, value] : parse_config_text(read_text(path))) {
    if (key == "config") continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(cmd) + 1, args.end());
  return out;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const std::out_of_range*>(&e)) return "invalid_argument";
  return "runtime";
}

void report(std::ostream& err, const std::string& message, const std::string& kind,
            const std::string& command) {
  nlohmann::ordered_json j;
  j["error"] = message;
  j["kind"] = kind;
  j["command"] = command;
  err << j.dump() << '\n';
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string echo_config(const CLI::App& command) {
  std::ostringstream out;
  out << "# " << command.get_name() << '\n';
  for (const CLI::Option* opt : command.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    if (value.empty() || value.find_first_of(" \t") != std::string::npos) value = '"' + value + '"';
    out << name << '=' << value << '\n';
  }
  return out.str();
}

void Context::progress(const std::string& line) const {
  if (!quiet && err) *err << line << '\n' << std::flush;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App root{"Energy-based 3D shape modelling: training, sampling, recovery, evaluation"};
  root.name("descnet");
  root.require_subcommand(1);
  root.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::vector<Command> commands{
      add_make_data(root), add_train(root),       add_coop(root),     add_sample(root),
      add_recover(root),   add_superres(root),    add_interpolate(root), add_arith(root),
      add_features(root),  add_classify(root),    add_eval(root),     add_export_obj(root)};

  struct Common {
    std::string config, out_dir = "out";
    int threads = 1;
    bool quiet = false;
    std::size_t progress_every = 10;
  };
  std::vector<Common> common(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* app = commands[i].app;
    auto& c = common[i];
    app->add_option("--config", c.config, "flat key=value file; flags override its values");
    app->add_option("--out-dir", c.out_dir, "directory receiving every output file")->capture_default_str();
    app->add_option("--threads", c.threads, "OpenMP threads (1 keeps runs bit-reproducible)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--quiet", c.quiet, "suppress progress lines on stderr")->capture_default_str();
    app->add_option("--progress-every", c.progress_every, "iterations between progress lines")
        ->capture_default_str();
  }

  std::string command_name;
  try {
    const auto expanded = expand_config(args, root);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    root.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << root.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << root.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = root.get_subcommands();
    report(err, e.what(), "usage", subs.empty() ? "" : subs.front()->get_name());
    return 2;
  } catch (const std::exception& e) {
    report(err, e.what(), error_kind(e), "");
    return 2;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i].app->parsed()) continue;
    command_name = commands[i].app->get_name();
    const auto& c = common[i];
    try {
      omp_set_num_threads(c.threads);
      Context ctx;
      ctx.out_dir = c.out_dir;
      ctx.quiet = c.quiet;
      ctx.progress_every = std::max<std::size_t>(1, c.progress_every);
      ctx.err = &err;
      std::filesystem::create_directories(ctx.out_dir);
      write_file_atomic(ctx.out_dir / "config.txt", echo_config(*commands[i].app));
      commands[i].run(ctx);
      return 0;
    } catch (const std::exception& e) {
      report(err, e.what(), error_kind(e), command_name);
      return 1;
    }
  }
  report(err, "no command given", "usage", "");
  return 2;
}

}  // namespace descnet::cli
