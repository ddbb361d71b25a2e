#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fbfrac/cli.hpp"

namespace {

using fbfrac::KeyValues;

const std::map<std::string, std::string>& key_help() {
  static const std::map<std::string, std::string> help = {
      {"input", "input PGM"},
      {"output", "output path"},
      {"kernel", "blur kernel: identity | average:N | disk:R | motion:L:THETA"},
      {"sigma", "noise standard deviation (grey levels)"},
      {"seed", "noise seed"},
      {"noise_file", "raw little-endian float64 noise field, already scaled"},
      {"manifest", "manifest path (default <output>.manifest)"},
      {"reference", "clean reference PGM"},
      {"history", "per-step history CSV (default <output>.history.csv)"},
      {"report", "report CSV to append a row to"},
      {"image", "image label for the report row"},
      {"snapshot_dir", "directory for u/w snapshots"},
      {"snapshot_every", "snapshot period in steps"},
      {"grid", "sweep grid CSV (header of solver keys)"},
      {"sizes", "comma-separated square sizes"},
      {"modes", "comma-separated nonlocal modes"},
      {"steps_per_size", "timed steps per benchmark row"},
      {"stop", "oracle | fixed | residual"},
      {"nonlocal_mode", "auto | dense | truncated | fft_p2"},
      {"sum_domain", "all_pairs | exclude_axes"},
  };
  return help;
}

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::string> configs;
  std::map<std::string, std::string> values;
  std::vector<std::string> keys;
};

void add_key_options(Command& c, const std::string& name) {
  const auto& info = fbfrac::cli::informational_keys();
  for (const auto& k : fbfrac::cli::allowed_keys(name)) {
    if (std::find(info.begin(), info.end(), k) != info.end()) continue;
    std::string names = "--" + k;
    if (k.find('_') != std::string::npos) {
      std::string dashed = k;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    const auto it = key_help().find(k);
    c.app->add_option(names, c.values[k], it == key_help().end() ? "solver parameter" : it->second);
    c.keys.push_back(k);
  }
  c.app->add_option("--config", c.configs, "key = value file(s); later files and explicit flags win");
}

KeyValues collect(const Command& c) {
  KeyValues kv;
  for (const auto& path : c.configs) kv.merge(KeyValues::load(path));
  for (const auto& k : c.keys)
    if (c.app->get_option("--" + k)->count() > 0) kv.set(k, c.values.at(k));
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional forward-backward image restoration"};
  // Help is --help only; single-letter solver keys (h, s, p, e) are long flags.
  app.set_help_flag("--help", "print help and exit");
  app.set_version_flag("--version", fbfrac::cli::kToolVersion);
  app.require_subcommand(1);

  std::map<std::string, Command> cmds;
  const std::vector<std::pair<std::string, std::string>> names = {
      {"degrade", "blur and add noise to a clean PGM"},
      {"restore", "restore a degraded PGM with the explicit scheme"},
      {"evaluate", "PSNR and SSIM of an image against a reference"},
      {"sweep", "oracle-stopped restore for every tuple of a parameter grid"},
      {"bench", "time explicit steps per nonlocal mode"}};
  for (const auto& [name, desc] : names) {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    c.app->set_help_flag("--help", "print help and exit");
    add_key_options(c, name);
  }
  std::vector<std::string> eval_pos;
  cmds["evaluate"].app->add_option("images", eval_pos, "IMAGE REFERENCE")->expected(0, 2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(fbfrac::ExitCode::validation);
  }

  try {
    for (auto& [name, c] : cmds) {
      if (!c.app->parsed()) continue;
      KeyValues kv = collect(c);
      if (name == "degrade") {
        const auto m = fbfrac::cli::cmd_degrade(kv);
        std::cout << "wrote " << m.get("output") << "\n";
      } else if (name == "restore") {
        const auto m = fbfrac::cli::cmd_restore(kv);
        std::cout << "wrote " << m.get("output") << " after " << m.get("steps") << " steps";
        if (m.has("psnr")) std::cout << ", psnr " << m.get("psnr") << ", ssim " << m.get("ssim");
        std::cout << "\n";
      } else if (name == "evaluate") {
        if (eval_pos.size() >= 1) kv.set("input", eval_pos[0]);
        if (eval_pos.size() >= 2) kv.set("reference", eval_pos[1]);
        fbfrac::cli::cmd_evaluate(kv, std::cout);
      } else if (name == "sweep") {
        fbfrac::cli::cmd_sweep(kv, std::cout);
      } else if (name == "bench") {
        fbfrac::cli::cmd_bench(kv, std::cout);
      }
    }
  } catch (const fbfrac::Error& e) {
    std::cerr << "fbfrac: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "fbfrac: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
