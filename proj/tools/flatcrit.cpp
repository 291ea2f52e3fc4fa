#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "flatcrit/cli.hpp"
#include "flatcrit/error.hpp"
#include "flatcrit/numerics.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamics and statistics of unimodal maps with a flat critical point"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;

  for (const char* name :
       {"build-scheme", "tails", "pressure", "equilibrium", "freeze", "correlations", "clt", "weak-limit", "all"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides outputs.dir)");
    sub->add_option("--workers", workers, "worker threads for parallel reductions")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "master seed (overrides stats.seed)")->each([&](const std::string&) {
      seed_given = true;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();

  flatcrit::RunConfig config;
  try {
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream text;
    text << in.rdbuf();
    config = flatcrit::parse_config(text.str());
  } catch (const flatcrit::Error& e) {
    std::cerr << "flatcrit: " << config_path << ": " << e.what() << "\n";
    return 2;
  }
  if (!out_dir.empty()) config.outputs.dir = out_dir;
  if (seed_given) config.stats.seed = seed;
  if (workers > 0) flatcrit::set_worker_count(workers);

  return flatcrit::execute(config, flatcrit::parse_command(command), std::cerr);
}
