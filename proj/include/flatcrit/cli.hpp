#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flatcrit/map_model.hpp"

namespace flatcrit {

struct SchemeConfig {
  int n_max = 2000;
  double tol = 1e-13;
  std::string cache_path;  // directory; empty means <outputs.dir>/cache
};

struct ThermoConfig {
  std::vector<double> t_grid = {0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0, 1.05, 1.1};
  int depth = 8;
  double p_lo = -1.0;
  double p_hi = 1.3862943611198906 + 1.0;
  int nodes = 32;
};

struct StatsConfig {
  long N = 1'000'000;
  int samples = 1000;
  long clt_N = 10'000;
  std::uint64_t seed = 1;
  long burn_in = 1000;
  std::vector<std::string> observables = {"x", "x2", "sqrt_dist_c", "sqrt_dist_01", "sin2pi"};
  int n_max_cor = 200;
  std::string correlation_source = "acip";  // or "gibbs"
  double gibbs_t = 0.8;
  int fit_n_min = 10;
  std::vector<double> weak_t_grid = {0.9, 0.95, 0.99};
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv", "json"};
  bool csv() const;
  bool json() const;
};

struct RunConfig {
  MapSpec map;
  SchemeConfig scheme;
  ThermoConfig thermo;
  StatsConfig stats;
  OutputConfig outputs;
};

// Throws ParseError (malformed JSON, with line/column) or ValidationError naming the field.
RunConfig parse_config(std::string_view text);
std::string canonical_config(const RunConfig& config);
// Hash of everything that affects results (output and cache locations excluded).
std::string config_hash(const RunConfig& config);

enum class Command { BuildScheme, Tails, Pressure, Equilibrium, Freeze, Correlations, Clt, WeakLimit, All };
std::string_view command_name(Command c);
Command parse_command(std::string_view name);

// Runs the pipelines of `command`, writing CSVs, summary.json and config.json into
// config.outputs.dir. Returns 0 on success; on a module error writes a diagnostic to
// `log` and returns 1.
int execute(const RunConfig& config, Command command, std::ostream& log);

}  // namespace flatcrit
