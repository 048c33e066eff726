// dialv: corpus preparation, training, generation and reply statistics for
// the latent-variable dialogue model and its baselines.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dialv/error.hpp"
#include "dialv/pipeline.hpp"

namespace {

std::string keys_help() {
  std::string out = "\nConfig keys (config file `key = value`, or --key value on the command line):\n";
  for (const auto& k : dialv::config_keys()) {
    out += "  " + k.name + " (default: " + (k.default_value.empty() ? "unset" : k.default_value) + ")\n      " +
           k.help + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-variable dialogue model toolkit"};
  app.require_subcommand(1);
  app.footer(keys_help());

  std::string config_file;
  app.add_option("--config", config_file, "flat key = value config file")->check(CLI::ExistingFile);

  // Every config key doubles as an option; command-line values win over the file.
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& key : dialv::config_keys()) {
    app.add_option_function<std::string>(
           "--" + key.name, [&overrides, name = key.name](const std::string& v) { overrides.emplace_back(name, v); },
           key.help)
        ->type_name("VALUE");
  }

  auto* prepare = app.add_subcommand("prepare", "build the vocabulary and the encoded pair cache");
  auto* train = app.add_subcommand("train", "train the latent or the baseline model");
  auto* generate = app.add_subcommand("generate", "write replies for every prompt");
  auto* eval = app.add_subcommand("eval", "reply statistics for replies files");
  auto* sweep = app.add_subcommand("shell-sweep", "latent-shell sweep over radii (same as eval --shell-sweep)");
  for (auto* sub : {prepare, train, generate, eval, sweep}) sub->fallthrough();

  generate->add_option_function<std::string>(
      "--n", [&overrides](const std::string& v) { overrides.emplace_back("samples", v); },
      "replies per prompt");

  std::vector<std::string> reply_files;
  bool shell_sweep_flag = false;
  eval->add_option("replies", reply_files, "replies files");
  eval->add_flag("--shell-sweep", shell_sweep_flag, "run the latent-shell sweep instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const dialv::RunConfig cfg = dialv::load_run_config(config_file, overrides);
    if (*prepare) {
      dialv::cmd_prepare(cfg, std::cout);
    } else if (*train) {
      dialv::cmd_train(cfg, std::cout);
    } else if (*generate) {
      dialv::cmd_generate(cfg, std::cout);
    } else if (*sweep || (*eval && shell_sweep_flag)) {
      dialv::cmd_shell_sweep(cfg, std::cout);
    } else if (*eval) {
      std::vector<std::filesystem::path> files(reply_files.begin(), reply_files.end());
      dialv::cmd_eval(cfg, files, std::cout);
    }
  } catch (const dialv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
