#include "flatcrit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "flatcrit/error.hpp"
#include "flatcrit/inducing.hpp"
#include "flatcrit/stats.hpp"
#include "flatcrit/thermo.hpp"
#include "json.hpp"

namespace flatcrit {

namespace fs = std::filesystem;
using nlohmann::json;

bool OutputConfig::csv() const { return std::find(formats.begin(), formats.end(), "csv") != formats.end(); }
bool OutputConfig::json() const { return std::find(formats.begin(), formats.end(), "json") != formats.end(); }

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::ValidationError, "field '" + field + "': " + why);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) invalid(path, "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
      invalid(path.empty() ? k : path + "." + k, "unknown key");
    }
  }
}

double get_real(const json& j, const char* key, const std::string& path, double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) invalid(path + "." + key, "must be a number");
  return v.get<double>();
}

long get_int(const json& j, const char* key, const std::string& path, long def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) invalid(path + "." + key, "must be an integer");
  return v.get<long>();
}

std::string get_string(const json& j, const char* key, const std::string& path, const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) invalid(path + "." + key, "must be a string");
  return v.get<std::string>();
}

std::vector<double> get_reals(const json& j, const char* key, const std::string& path, std::vector<double> def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) invalid(path + "." + key, "must be a non-empty array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) invalid(path + "." + key, "must be a non-empty array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> get_strings(const json& j, const char* key, const std::string& path,
                                     std::vector<std::string> def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) invalid(path + "." + key, "must be a non-empty array of strings");
  std::vector<std::string> out;
  for (const json& e : v) {
    if (!e.is_string()) invalid(path + "." + key, "must be a non-empty array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) invalid(field, why);
}

bool ascending(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

json config_json(const RunConfig& c, bool with_locations) {
  json j;
  j["map"] = {{"family", family_name(c.map.family)},
              {"alpha", c.map.alpha},
              {"v0", c.map.v0},
              {"c", c.map.c},
              {"surgery_radius", c.map.surgery_radius},
              {"endpoint_slope", c.map.endpoint_slope}};
  j["scheme"] = {{"n_max", c.scheme.n_max}, {"tol", c.scheme.tol}};
  j["thermo"] = {{"t_grid", c.thermo.t_grid},
                 {"depth", c.thermo.depth},
                 {"p_search", {c.thermo.p_lo, c.thermo.p_hi}},
                 {"nodes", c.thermo.nodes}};
  j["stats"] = {{"N", c.stats.N},
                {"samples", c.stats.samples},
                {"clt_N", c.stats.clt_N},
                {"seed", c.stats.seed},
                {"burn_in", c.stats.burn_in},
                {"observables", c.stats.observables},
                {"n_max_cor", c.stats.n_max_cor},
                {"correlation_source", c.stats.correlation_source},
                {"gibbs_t", c.stats.gibbs_t},
                {"fit_n_min", c.stats.fit_n_min},
                {"weak_t_grid", c.stats.weak_t_grid}};
  if (with_locations) {
    j["scheme"]["cache_path"] = c.scheme.cache_path;
    j["outputs"] = {{"dir", c.outputs.dir}, {"formats", c.outputs.formats}};
  }
  return j;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  check_keys(j, "", {"map", "scheme", "thermo", "stats", "outputs"});
  RunConfig c;
  if (!j.contains("map")) invalid("map", "required");

  const json& m = j.at("map");
  check_keys(m, "map", {"family", "alpha", "v0", "c", "surgery_radius", "endpoint_slope"});
  if (!m.contains("family")) invalid("map.family", "required");
  try {
    c.map.family = parse_family(get_string(m, "family", "map", ""));
  } catch (const Error&) {
    invalid("map.family", "must be one of chebyshev, log_flat, power_flat");
  }
  c.map.alpha = get_real(m, "alpha", "map", c.map.alpha);
  c.map.v0 = get_real(m, "v0", "map", c.map.v0);
  c.map.c = get_real(m, "c", "map", c.map.c);
  c.map.surgery_radius = get_real(m, "surgery_radius", "map", c.map.surgery_radius);
  c.map.endpoint_slope = get_real(m, "endpoint_slope", "map", c.map.endpoint_slope);
  require(c.map.alpha > 0.0, "map.alpha", "must be > 0");
  require(c.map.v0 > 0.0 && c.map.v0 < 1.0, "map.v0", "must lie in (0,1)");
  require(c.map.c > 0.0 && c.map.c < 1.0, "map.c", "must lie in (0,1)");
  require(c.map.surgery_radius > 0.0 && c.map.surgery_radius < std::min(c.map.c, 1.0 - c.map.c),
          "map.surgery_radius", "must lie in (0, min(c, 1-c))");
  require(c.map.endpoint_slope > 1.0, "map.endpoint_slope", "must be > 1");

  if (j.contains("scheme")) {
    const json& s = j.at("scheme");
    check_keys(s, "scheme", {"n_max", "tol", "cache_path"});
    c.scheme.n_max = static_cast<int>(get_int(s, "n_max", "scheme", c.scheme.n_max));
    c.scheme.tol = get_real(s, "tol", "scheme", c.scheme.tol);
    c.scheme.cache_path = get_string(s, "cache_path", "scheme", c.scheme.cache_path);
  }
  require(c.scheme.n_max >= 2 && c.scheme.n_max <= 1'000'000, "scheme.n_max", "must lie in [2, 10^6]");
  require(c.scheme.tol > 0.0 && c.scheme.tol < 1e-3, "scheme.tol", "must lie in (0, 1e-3)");

  if (j.contains("thermo")) {
    const json& t = j.at("thermo");
    check_keys(t, "thermo", {"t_grid", "depth", "p_search", "nodes"});
    c.thermo.t_grid = get_reals(t, "t_grid", "thermo", c.thermo.t_grid);
    c.thermo.depth = static_cast<int>(get_int(t, "depth", "thermo", c.thermo.depth));
    const auto ps = get_reals(t, "p_search", "thermo", {c.thermo.p_lo, c.thermo.p_hi});
    require(ps.size() == 2 && ps[0] < ps[1], "thermo.p_search", "must be [lo, hi] with lo < hi");
    c.thermo.p_lo = ps[0];
    c.thermo.p_hi = ps[1];
    c.thermo.nodes = static_cast<int>(get_int(t, "nodes", "thermo", c.thermo.nodes));
  }
  require(ascending(c.thermo.t_grid) && c.thermo.t_grid.front() > 0.0 && c.thermo.t_grid.back() <= 1.2,
          "thermo.t_grid", "must be ascending inside (0, 1.2]");
  require(c.thermo.depth >= 1 && c.thermo.depth <= 64, "thermo.depth", "must lie in [1, 64]");
  require(c.thermo.nodes >= 4 && c.thermo.nodes <= 256 && c.thermo.nodes % 2 == 0, "thermo.nodes",
          "must be even and in [4, 256]");

  if (j.contains("stats")) {
    const json& s = j.at("stats");
    check_keys(s, "stats", {"N", "samples", "clt_N", "seed", "burn_in", "observables", "n_max_cor",
                            "correlation_source", "gibbs_t", "fit_n_min", "weak_t_grid"});
    c.stats.N = get_int(s, "N", "stats", c.stats.N);
    c.stats.samples = static_cast<int>(get_int(s, "samples", "stats", c.stats.samples));
    c.stats.clt_N = get_int(s, "clt_N", "stats", c.stats.clt_N);
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) invalid("stats.seed", "must be a non-negative integer");
      c.stats.seed = s.at("seed").get<std::uint64_t>();
    }
    c.stats.burn_in = get_int(s, "burn_in", "stats", c.stats.burn_in);
    c.stats.observables = get_strings(s, "observables", "stats", c.stats.observables);
    c.stats.n_max_cor = static_cast<int>(get_int(s, "n_max_cor", "stats", c.stats.n_max_cor));
    c.stats.correlation_source = get_string(s, "correlation_source", "stats", c.stats.correlation_source);
    c.stats.gibbs_t = get_real(s, "gibbs_t", "stats", c.stats.gibbs_t);
    c.stats.fit_n_min = static_cast<int>(get_int(s, "fit_n_min", "stats", c.stats.fit_n_min));
    c.stats.weak_t_grid = get_reals(s, "weak_t_grid", "stats", c.stats.weak_t_grid);
  }
  require(c.stats.N >= 1 && c.stats.N <= 10'000'000'000L, "stats.N", "must lie in [1, 10^10]");
  require(c.stats.samples >= 100, "stats.samples", "must be >= 100");
  require(c.stats.clt_N >= 10, "stats.clt_N", "must be >= 10");
  require(c.stats.burn_in >= 0, "stats.burn_in", "must be >= 0");
  require(c.stats.n_max_cor >= 0 && c.stats.n_max_cor < c.stats.N, "stats.n_max_cor", "must lie in [0, N)");
  require(c.stats.correlation_source == "acip" || c.stats.correlation_source == "gibbs",
          "stats.correlation_source", "must be acip or gibbs");
  require(c.stats.gibbs_t > -1.0 && c.stats.gibbs_t <= 1.2, "stats.gibbs_t", "must lie in (-1, 1.2]");
  require(c.stats.fit_n_min >= 1, "stats.fit_n_min", "must be >= 1");
  require(ascending(c.stats.weak_t_grid) && c.stats.weak_t_grid.front() > 0.0 && c.stats.weak_t_grid.back() <= 1.0,
          "stats.weak_t_grid", "must be ascending inside (0, 1]");
  for (const auto& name : c.stats.observables) {
    try {
      (void)parse_observable(name);
    } catch (const Error& e) {
      invalid("stats.observables", e.what());
    }
  }

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    check_keys(o, "outputs", {"dir", "formats"});
    c.outputs.dir = get_string(o, "dir", "outputs", c.outputs.dir);
    c.outputs.formats = get_strings(o, "formats", "outputs", c.outputs.formats);
  }
  require(!c.outputs.dir.empty(), "outputs.dir", "must not be empty");
  for (const auto& f : c.outputs.formats) require(f == "csv" || f == "json", "outputs.formats", "csv or json only");
  return c;
}

std::string canonical_config(const RunConfig& config) { return config_json(config, true).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) { return hex64(fnv1a64(config_json(config, false).dump())); }

std::string_view command_name(Command c) {
  switch (c) {
    case Command::BuildScheme: return "build-scheme";
    case Command::Tails: return "tails";
    case Command::Pressure: return "pressure";
    case Command::Equilibrium: return "equilibrium";
    case Command::Freeze: return "freeze";
    case Command::Correlations: return "correlations";
    case Command::Clt: return "clt";
    case Command::WeakLimit: return "weak-limit";
    case Command::All: return "all";
  }
  return "all";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::BuildScheme, Command::Tails, Command::Pressure, Command::Equilibrium, Command::Freeze,
                    Command::Correlations, Command::Clt, Command::WeakLimit, Command::All}) {
    if (command_name(c) == name) return c;
  }
  throw Error(ErrorKind::ValidationError, "unknown command '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Execution

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return format_double(x);
}

json jnum(double x) { return std::isfinite(x) ? json(x) : json(num(x)); }

class Csv {
 public:
  Csv(const fs::path& path, std::string_view command, const std::string& hash, const std::string& map_fp,
      const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out_ << "# flatcrit " << command << "\n# config_hash " << hash << "\n# map " << map_fp << "\n";
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

class Run {
 public:
  Run(const RunConfig& config, std::ostream& log)
      : cfg_(config), log_(log), out_(config.outputs.dir), hash_(config_hash(config)),
        map_(std::make_shared<const FlatUnimodalMap>(config.map)) {
    fs::create_directories(out_);
    summary_["config_hash"] = hash_;
    summary_["map_fingerprint"] = map_->fingerprint();
  }

  void run(Command c) {
    switch (c) {
      case Command::BuildScheme: build_scheme_cmd(); break;
      case Command::Tails: tails(); break;
      case Command::Pressure: pressure(); break;
      case Command::Equilibrium: equilibrium(); break;
      case Command::Freeze: freeze(); break;
      case Command::Correlations: correlations(); break;
      case Command::Clt: clt(); break;
      case Command::WeakLimit: weak_limit(); break;
      case Command::All:
        build_scheme_cmd();
        tails();
        pressure();
        equilibrium();
        freeze();
        correlations();
        clt();
        if (map_->is_flat()) {
          weak_limit();
        } else {
          summary_["weak_limit"] = {{"skipped", "weak-limit scan needs a flat family"}};
        }
        break;
    }
  }

  void finish(Command c) {
    summary_["command"] = command_name(c);
    if (cfg_.outputs.json()) {
      std::ofstream(out_ / "summary.json", std::ios::binary) << summary_.dump(2) << "\n";
    }
    std::ofstream(out_ / "config.json", std::ios::binary) << canonical_config(cfg_);
  }

 private:
  std::unique_ptr<Csv> csv(const char* name, std::string_view command, const std::vector<std::string>& header) {
    if (!cfg_.outputs.csv()) return nullptr;
    return std::make_unique<Csv>(out_ / name, command, hash_, map_->fingerprint(), header);
  }

  fs::path cache_file() const {
    fs::path dir = cfg_.scheme.cache_path.empty() ? out_ / "cache" : fs::path(cfg_.scheme.cache_path);
    if (const char* env = std::getenv("FLATCRIT_CACHE"); env && *env) dir = env;
    const std::string tol_tag = hex64(fnv1a64(format_17(cfg_.scheme.tol)));
    return dir / ("scheme-" + map_->fingerprint() + "-n" + std::to_string(cfg_.scheme.n_max) + "-" + tol_tag +
                  ".json");
  }

  const InducingScheme& scheme() {
    if (scheme_) return *scheme_;
    const fs::path path = cache_file();
    if (fs::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      InducingScheme s = scheme_from_json(ss.str(), map_);
      if (s.n_max == cfg_.scheme.n_max && format_17(s.tol) == format_17(cfg_.scheme.tol)) {
        log_ << "cache hit: " << path.string() << "\n";
        scheme_ = std::make_unique<InducingScheme>(std::move(s));
        return *scheme_;
      }
    }
    log_ << "cache miss: enumerating branches up to R=" << cfg_.scheme.n_max << "\n";
    const NiceInterval I = nice_interval(*map_);
    scheme_ = std::make_unique<InducingScheme>(build_scheme(map_, I, cfg_.scheme.n_max, cfg_.scheme.tol));
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << scheme_to_json(*scheme_);
    log_ << "cache write: " << path.string() << "\n";
    return *scheme_;
  }

  const TransferModel& model() {
    if (!model_) {
      TransferOptions opts;
      opts.nodes = cfg_.thermo.nodes;
      opts.p_lo = cfg_.thermo.p_lo;
      opts.p_hi = cfg_.thermo.p_hi;
      model_ = std::make_unique<TransferModel>(scheme(), opts);
    }
    return *model_;
  }

  const PressureBracket& pressure_at(double t) {
    auto it = pressure_cache_.find(t);
    if (it == pressure_cache_.end()) it = pressure_cache_.emplace(t, model().solve_pressure(t, cfg_.thermo.depth)).first;
    return it->second;
  }

  std::vector<Observable> bounded_observables() const {
    std::vector<Observable> out;
    for (const auto& o : parse_observables(cfg_.stats.observables)) {
      if (o.bounded()) out.push_back(o);
    }
    return out;
  }

  void build_scheme_cmd() {
    const InducingScheme& s = scheme();
    const FlatUnimodalMap& map = *map_;
    if (auto f = csv("branches.csv", "build-scheme",
                     {"index", "side", "R", "lo", "hi", "u_lo", "u_hi", "log_measure", "log_df_min", "log_df_max",
                      "log_df_periodic"})) {
      for (std::size_t i = 0; i < s.branches.size(); ++i) {
        const Branch& b = s.branches[i];
        f->row({std::to_string(i), std::string(side_name(b.side)), std::to_string(b.R), num(map.to_plain(b.lo)),
                num(map.to_plain(b.hi)), num(b.u_lo), num(b.u_hi), num(b.log_measure), num(b.log_df_min()),
                num(b.log_df_max()), num(b.log_df_periodic)});
      }
    }
    const MisiurewiczReport mr = misiurewicz_report(map, 100, 6);
    summary_["build_scheme"] = {{"a_minus", jnum(s.interval.a_minus)},
                                {"a_plus", jnum(s.interval.a_plus)},
                                {"tau", jnum(s.interval.tau)},
                                {"K_tau", jnum(s.interval.K_tau)},
                                {"n_max", s.n_max},
                                {"branches", s.branches.size()},
                                {"unresolved_mass", jnum(s.unresolved_mass)},
                                {"max_endpoint_residual", jnum(s.max_endpoint_residual)},
                                {"misiurewicz",
                                 {{"m1_pass", mr.m1_pass},
                                  {"m2_pass", mr.m2_pass},
                                  {"postcritical_min_distance", jnum(mr.postcritical_min_distance)},
                                  {"min_log_multiplier", jnum(mr.min_log_multiplier)},
                                  {"periodic_points", mr.periodic_points.size()}}}};
  }

  void tails() {
    const InducingScheme& s = scheme();
    const TailTable t = tail_statistics(s);
    if (auto f = csv("tails.csv", "tails", {"n", "count", "log_tail", "tail", "log_tail_sum"})) {
      for (const TailRow& r : t.rows) {
        f->row({std::to_string(r.n), std::to_string(r.count), num(r.log_tail), num(std::exp(r.log_tail)),
                num(r.log_tail_sum)});
      }
    }
    json j = {{"fit_lo", t.fit_lo},
              {"fit_hi", t.fit_hi},
              {"polynomial", {{"slope", jnum(t.polynomial.slope)}, {"r2", jnum(t.polynomial.r2)}}},
              {"stretched",
               {{"exponent", jnum(t.stretched_exponent)},
                {"slope", jnum(t.stretched.slope)},
                {"r2", jnum(t.stretched.r2)}}},
              {"tail_ratio", jnum(t.tail_ratio)},
              {"unresolved_mass", jnum(t.unresolved_mass)},
              {"max_partition_residual", jnum(t.max_partition_residual)}};
    if (cfg_.map.family == Family::PowerFlat) {
      const TailSumReport ts = tail_sum_bound_check(s, cfg_.map.v0);
      j["tail_sum"] = {{"slope", jnum(ts.slope)},
                       {"window", {jnum(ts.window_lo), jnum(ts.window_hi)}},
                       {"in_window", ts.in_window},
                       {"polynomial", ts.polynomial},
                       {"n_range", {ts.n_lo, ts.n_hi}}};
    }
    summary_["tails"] = j;
  }

  void pressure() {
    const TransferModel& m = model();
    auto f = csv("pressure.csv", "pressure",
                 {"t", "p_lo", "p_hi", "truncation_error", "distortion_width", "chi", "entropy", "mean_return",
                  "kac_defect", "identity_residual"});
    json rows = json::array();
    for (double t : cfg_.thermo.t_grid) {
      const PressureBracket& P = pressure_at(t);
      EquilibriumReport eq;
      std::string note;
      try {
        eq = m.equilibrium_at(P, {});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TailDominated) throw;
        note = e.what();
        eq.chi = eq.entropy = eq.mean_return = eq.kac_defect = eq.identity_residual = kNaN;
      }
      if (f) {
        f->row({num(t), num(P.lo), num(P.hi), num(P.truncation_error), num(P.distortion_width), num(eq.chi),
                num(eq.entropy), num(eq.mean_return), num(eq.kac_defect), num(eq.identity_residual)});
      }
      json r = {{"t", t}, {"p_lo", jnum(P.lo)}, {"p_hi", jnum(P.hi)}, {"chi", jnum(eq.chi)}};
      if (!note.empty()) r["note"] = note;
      rows.push_back(r);
    }
    summary_["pressure"] = {{"depth", cfg_.thermo.depth}, {"rows", rows}};
  }

  void equilibrium() {
    const TransferModel& m = model();
    const auto obs = parse_observables(cfg_.stats.observables);
    auto f = csv("equilibrium.csv", "equilibrium", {"t", "observable", "expectation"});
    auto g = csv("gibbs.csv", "equilibrium", {"t", "word", "R", "weight"});
    auto gc = csv("gibbs_check.csv", "equilibrium",
                  {"t", "p", "weight_sum_error", "log_C1", "log_C2", "min_log_ratio", "max_log_ratio", "bound",
                   "pass"});
    json rows = json::array();
    for (double t : cfg_.thermo.t_grid) {
      const PressureBracket& P = pressure_at(t);
      json r = {{"t", t}, {"P_mid", jnum(P.mid())}};
      try {
        const EquilibriumReport eq = m.equilibrium_at(P, obs);
        for (const auto& [name, v] : eq.observable_expectations) {
          if (f) f->row({num(t), name, num(v)});
          r["expectations"][name] = jnum(v);
        }
        r["chi"] = jnum(eq.chi);
        r["entropy"] = jnum(eq.entropy);
        r["kac_defect"] = jnum(eq.kac_defect);
        r["identity_residual"] = jnum(eq.identity_residual);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TailDominated) throw;
        r["note"] = e.what();
      }
      const GibbsCylinderMeasure g1 = m.gibbs_cylinders(t, P.mid(), 1);
      const GibbsCylinderMeasure g2 = m.gibbs_cylinders(t, P.mid(), 2);
      const RefinementCheck rc = m.refinement_consistency(g1, g2);
      double total = 0.0;
      for (double w : g1.weights) total += w;
      if (g) {
        for (std::size_t i = 0; i < g1.words.size(); ++i) {
          g->row({num(t), std::to_string(g1.words[i][0]), std::to_string(g1.returns[i]), num(g1.weights[i])});
        }
      }
      if (gc) {
        gc->row({num(t), num(P.mid()), num(std::abs(total - 1.0)), num(g2.log_C1), num(g2.log_C2),
                 num(rc.min_log_ratio), num(rc.max_log_ratio), num(rc.bound), rc.pass ? "1" : "0"});
      }
      r["refinement_pass"] = rc.pass;
      rows.push_back(r);
    }
    summary_["equilibrium"] = {{"rows", rows}};
  }

  void freeze() {
    const TransferModel& m = model();
    std::vector<double> grid;
    for (double t : cfg_.thermo.t_grid) {
      if (t > 0.0 && t <= 1.2) grid.push_back(t);
    }
    FreezeReport rep;
    for (double t : grid) pressure_at(t);
    rep = m.freeze_scan(grid, cfg_.thermo.depth);
    if (auto f = csv("freeze.csv", "freeze", {"t", "p_lo", "p_hi", "sign"})) {
      for (const FreezeRow& r : rep.rows) f->row({num(r.t), num(r.P.lo), num(r.P.hi), std::string(sign_name(r.sign))});
    }
    if (auto f = csv("chi_trend.csv", "freeze", {"n", "chi_inf", "chi_sup"})) {
      for (const ChiTrendRow& r : rep.chi_trend) f->row({std::to_string(r.n), num(r.chi_inf), num(r.chi_sup)});
    }
    json trend = json::array();
    for (const ChiTrendRow& r : rep.chi_trend) trend.push_back({{"n", r.n}, {"chi_inf", jnum(r.chi_inf)}});
    summary_["freeze"] = {{"t_plus", rep.t_plus_found ? json(rep.t_plus) : json(nullptr)},
                          {"acim_integral", jnum(rep.acim_integral)},
                          {"acim_finite", rep.acim_finite},
                          {"chi_trend", trend}};
  }

  void correlations() {
    CorrelationSource src;
    if (cfg_.stats.correlation_source == "gibbs") {
      src.kind = CorrelationSourceKind::GibbsMeasure;
      src.t = cfg_.stats.gibbs_t;
      src.depth = cfg_.thermo.depth;
      src.model = &model();
    }
    auto f = csv("correlations.csv", "correlations", {"observable", "n", "cor", "noise_floor"});
    json fits = json::object();
    for (const Observable& phi : bounded_observables()) {
      const CorrelationSeries cs = correlation_series(*map_, phi, phi, cfg_.stats.n_max_cor, cfg_.stats.seed,
                                                      cfg_.stats.N, src, cfg_.stats.burn_in);
      if (f) {
        for (std::size_t l = 0; l < cs.lags.size(); ++l) {
          f->row({phi.name(), std::to_string(cs.lags[l]), num(cs.cor[l]), num(cs.noise_floor)});
        }
      }
      json j;
      try {
        const DecayFit fit = decay_fit(cs, kAllDecayModels, cfg_.stats.fit_n_min);
        j["best"] = decay_model_name(fit.best.model);
        j["n_range"] = {fit.n_lo, fit.n_hi};
        for (const DecayCandidate& c : fit.candidates) {
          j["candidates"][std::string(decay_model_name(c.model))] = {
              {"param", jnum(c.param)}, {"r2", jnum(c.r2)}, {"adjusted_r2", jnum(c.adjusted_r2)}};
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientSignal) throw;
        j["insufficient_signal"] = e.what();
      }
      fits[phi.name()] = j;
    }
    summary_["correlations"] = {{"source", cfg_.stats.correlation_source}, {"fits", fits}};
    if (src.kind == CorrelationSourceKind::GibbsMeasure) summary_["correlations"]["t"] = src.t;
  }

  void clt() {
    auto f = csv("clt.csv", "clt",
                 {"observable", "mean", "sigma", "ks_distance", "samples", "N", "coboundary", "green_kubo_sigma2"});
    json rows = json::object();
    for (const Observable& phi : bounded_observables()) {
      const CltReport r = clt_test(*map_, phi, cfg_.stats.clt_N, cfg_.stats.samples, cfg_.stats.seed,
                                   cfg_.stats.burn_in);
      if (f) {
        f->row({phi.name(), num(r.mean), num(r.sigma), num(r.ks_distance), std::to_string(r.samples),
                std::to_string(r.N), r.coboundary ? "1" : "0", num(r.green_kubo_sigma2)});
      }
      rows[phi.name()] = {{"sigma", jnum(r.sigma)}, {"ks_distance", jnum(r.ks_distance)}, {"coboundary", r.coboundary}};
    }
    summary_["clt"] = rows;
  }

  void weak_limit() {
    if (!map_->is_flat()) throw Error(ErrorKind::InvalidSpec, "weak-limit scan needs a flat family");
    const WeakLimitReport rep = weak_limit_scan(model(), cfg_.stats.weak_t_grid, bounded_observables(),
                                                cfg_.thermo.depth,
                                                {cfg_.stats.seed, cfg_.stats.burn_in, cfg_.stats.N});
    if (auto f = csv("weak_limit.csv", "weak-limit", {"t", "observable", "mu_t", "mu_ac", "diff"})) {
      for (const WeakLimitRow& r : rep.rows) f->row({num(r.t), r.observable, num(r.mu_t), num(r.mu_ac), num(r.diff)});
    }
    json rows = json::array();
    for (std::size_t i = 0; i < rep.t.size(); ++i) {
      rows.push_back({{"t", rep.t[i]},
                      {"max_discrepancy", jnum(rep.max_discrepancy[i])},
                      {"phi_4", jnum(rep.tent_mass[i][0])},
                      {"phi_8", jnum(rep.tent_mass[i][1])},
                      {"phi_16", jnum(rep.tent_mass[i][2])}});
    }
    summary_["weak_limit"] = {{"rows", rows}, {"monotone", rep.monotone}};
  }

  const RunConfig& cfg_;
  std::ostream& log_;
  fs::path out_;
  std::string hash_;
  std::shared_ptr<const FlatUnimodalMap> map_;
  std::unique_ptr<InducingScheme> scheme_;
  std::unique_ptr<TransferModel> model_;
  std::map<double, PressureBracket> pressure_cache_;
  json summary_;
};

}  // namespace

int execute(const RunConfig& config, Command command, std::ostream& log) {
  try {
    Run run(config, log);
    run.run(command);
    run.finish(command);
    return 0;
  } catch (const Error& e) {
    log << "error while running " << command_name(command) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    log << "error while running " << command_name(command) << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace flatcrit
