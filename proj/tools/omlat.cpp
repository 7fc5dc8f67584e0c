// omlat: run optomechanical-lattice experiments from YAML recipes.
//
//   omlat <experiment> --config <file> [--out <dir>] [--threads N]
//   omlat list [--recipes <dir>]
//
// Exit codes: 0 ok, 2 invalid config or arguments, 3 numerical abort, 4 I/O.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>

#include "omlat/config.hpp"
#include "omlat/runner.hpp"

#ifndef OMLAT_RECIPE_DIR
#define OMLAT_RECIPE_DIR "recipes"
#endif

namespace fs = std::filesystem;

namespace {

int list_recipes(const fs::path& dir) {
  std::cout << "experiment kinds:";
  for (const auto& k : omlat::config::experiment_kinds()) std::cout << ' ' << k;
  std::cout << "\n\n";
  if (!fs::is_directory(dir)) throw omlat::IoError("recipe directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".yaml") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto c = omlat::config::load(f);
    const std::string fig = c["figure"];
    std::cout << f.filename().string() << "  [" << c["experiment"].get<std::string>() << "]  "
              << (fig == "analytic" || fig.empty() ? fig : "figure " + fig) << "  "
              << c["description"].get<std::string>() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven-dissipative optomechanical lattice simulator"};
  app.set_version_flag("--version", std::string(omlat::output::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "results";
  unsigned threads = 0;
  std::string recipe_dir = OMLAT_RECIPE_DIR;

  for (const auto& kind : omlat::config::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run a '" + kind + "' experiment");
    sub->add_option("--config,-c", config_path, "recipe file (YAML)")->required();
    sub->add_option("--out,-o", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads,-j", threads, "worker threads (0 = hardware)")->capture_default_str();
  }
  auto* list = app.add_subcommand("list", "list shipped recipes");
  list->add_option("--recipes", recipe_dir, "recipe directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (list->parsed()) return list_recipes(recipe_dir);
    const std::string kind = app.get_subcommands().front()->get_name();
    const auto cfg = omlat::config::load(config_path);
    if (cfg["experiment"] != kind)
      throw omlat::ValidationError("config is for experiment '" + cfg["experiment"].get<std::string>() +
                                   "', not '" + kind + "'");
    const auto a = omlat::runner::run_and_write(cfg, out_dir, threads);
    std::cout << a.csv.string() << "\n" << a.metadata.string() << "\n";
    return 0;
  } catch (const omlat::ValidationError& e) {
    std::cerr << "omlat: invalid: " << e.what() << "\n";
    return 2;
  } catch (const omlat::IoError& e) {
    std::cerr << "omlat: i/o error: " << e.what() << "\n";
    return 4;
  } catch (const omlat::NumericalError& e) {
    std::cerr << "omlat: numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "omlat: invalid: " << e.what() << "\n";
    return 2;
  }
}
