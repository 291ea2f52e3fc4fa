// Acceptance suite: one PASS/FAIL line per criterion, with the measured values.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "flatcrit/cli.hpp"
#include "flatcrit/error.hpp"
#include "flatcrit/stats.hpp"
#include "flatcrit/thermo.hpp"

using namespace flatcrit;
namespace fs = std::filesystem;

namespace {

class Criterion {
 public:
  Criterion(int id, std::string title, double budget_s)
      : id_(id), title_(std::move(title)), budget_(budget_s), start_(std::chrono::steady_clock::now()) {
    std::printf("criterion %d: %s\n", id_, title_.c_str());
    std::fflush(stdout);
  }

  void check(const std::string& what, bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    std::printf("  [%s] %s: %s\n", ok ? "ok" : "FAILED", what.c_str(), detail.c_str());
    std::fflush(stdout);
  }

  template <class F>
  void guard(const std::string& what, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      check(what, false, std::string("error: ") + e.what());
    }
  }

  bool finish() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    check("time budget", s <= budget_, fmt("%.1f s (<= %.0f s)", s, budget_));
    std::printf("%s %d %s\n", ok_ ? "PASS" : "FAIL", id_, title_.c_str());
    std::fflush(stdout);
    return ok_;
  }

  static std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2))) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
  }

 private:
  int id_;
  std::string title_;
  double budget_;
  bool ok_ = true;
  std::chrono::steady_clock::time_point start_;
};

using F = Criterion;

std::shared_ptr<const FlatUnimodalMap> make(Family family, double param = 0.0) {
  MapSpec s;
  s.family = family;
  if (family == Family::PowerFlat) s.v0 = param;
  if (family == Family::LogFlat) s.alpha = param;
  return std::make_shared<const FlatUnimodalMap>(s);
}

constexpr int kNmax = 10000;
const std::vector<double> kGrid = {0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0, 1.05, 1.1};

// Power-flat v0=0.4 with n_max = 10^4 is shared by criteria 3, 4, 5 and 7.
const TransferModel& power_flat_04() {
  static const InducingScheme s = [] {
    auto f = make(Family::PowerFlat, 0.4);
    return build_scheme(f, nice_interval(*f), kNmax, 1e-13);
  }();
  static const TransferModel m(s);
  return m;
}

std::map<double, PressureBracket>& pressure_cache() {
  static std::map<double, PressureBracket> cache;
  return cache;
}

const PressureBracket& pf_pressure(double t) {
  auto& c = pressure_cache();
  auto it = c.find(t);
  if (it == c.end()) it = c.emplace(t, power_flat_04().solve_pressure(t, 8)).first;
  return it->second;
}

double chebyshev_chi_oracle() {
  boost::math::quadrature::tanh_sinh<double> q;
  const double pi = 3.14159265358979323846;
  auto g = [&](double x) { return std::log(std::abs(4.0 - 8.0 * x)) / (pi * std::sqrt(x * (1.0 - x))); };
  return q.integrate(g, 0.0, 0.5) + q.integrate(g, 0.5, 1.0);
}

bool criterion1() {
  Criterion c(1, "Chebyshev golden suite", 10);
  const auto f = make(Family::Chebyshev);
  c.guard("suite", [&] {
    const NiceInterval I = nice_interval(*f);
    const double err = std::max(std::abs(I.a_minus - 0.25), std::abs(I.a_plus - 0.75));
    c.check("I = (0.25, 0.75)", err <= 1e-12, F::fmt("max endpoint error %.2e (<= 1e-12)", err));

    const InducingScheme S = build_scheme(f, I, 200, 1e-13);
    std::map<int, int> count;
    for (const Branch& b : S.branches) count[b.R] += 1;
    bool two = true;
    for (int n = 2; n <= 20; ++n) two = two && count[n] == 2;
    c.check("#S(n) = 2 for 2 <= n <= 20", two, "counted per return time");
    bool ladder = true;
    for (const Branch& b : S.branches) {
      const auto r = return_time(*f, I, ChartPoint::near_c(b.side, b.u_mid()));
      ladder = ladder && r && *r == b.depth() + 2;
    }
    c.check("ladder R = k + 2 at branch midpoints", ladder, F::fmt("%zu branches", S.branches.size()));

    const TransferModel m(S);
    const PressureBracket p0 = m.solve_pressure(0.0, 8);
    c.check("P(0) contains log 2, width <= 0.01", p0.contains(std::log(2.0)) && p0.width() <= 0.01,
            F::fmt("[%.15f, %.15f]", p0.lo, p0.hi));
    const PressureBracket p1 = m.solve_pressure(1.0, 8);
    c.check("P(1) contains 0, width <= 0.05", p1.contains(0.0) && p1.width() <= 0.05,
            F::fmt("[%.3e, %.3e]", p1.lo, p1.hi));
    const EquilibriumReport eq = m.equilibrium_at(p1, {});
    const double oracle = chebyshev_chi_oracle();
    c.check("chi(mu_1) within 0.01 of the density value", std::abs(eq.chi - oracle) <= 0.01,
            F::fmt("chi %.10f, density oracle %.10f", eq.chi, oracle));
  });
  return c.finish();
}

bool criterion2() {
  Criterion c(2, "tail exponents", 300);
  for (double v0 : {0.4, 0.5}) {
    c.guard(F::fmt("power_flat v0=%.1f", v0), [&] {
      const auto f = make(Family::PowerFlat, v0);
      const InducingScheme S = build_scheme(f, nice_interval(*f), kNmax, 1e-13);
      const TailTable T = tail_statistics(S);
      const double target = -1.0 / v0;
      c.check(F::fmt("v0=%.1f |{R>n}| log-log slope = %.2f +- 0.3", v0, target),
              std::abs(T.polynomial.slope - target) <= 0.3,
              F::fmt("slope %.3f on n in [%d, %d], R2 %.4f", T.polynomial.slope, T.fit_lo, T.fit_hi, T.polynomial.r2));
      const TailSumReport ts = tail_sum_bound_check(S, v0);
      const double ts_target = 1.0 - 1.0 / v0;
      c.check(F::fmt("v0=%.1f tail-sum slope = %.2f +- 0.3", v0, ts_target),
              ts.polynomial && std::abs(ts.slope - ts_target) <= 0.3,
              F::fmt("slope %.3f on n in [%d, %d]", ts.slope, ts.n_lo, ts.n_hi));
    });
  }
  for (double alpha : {1.0, 2.0}) {
    c.guard(F::fmt("log_flat alpha=%.0f", alpha), [&] {
      const auto f = make(Family::LogFlat, alpha);
      const InducingScheme S = build_scheme(f, nice_interval(*f), kNmax, 1e-13);
      TailFitOptions o;
      o.stretched_exponent = 1.0 / (alpha + 1.0);
      const TailTable T = tail_statistics(S, o);
      c.check(F::fmt("alpha=%.0f log|{R>n}| linear in n^(1/%.0f), R2 >= 0.98", alpha, alpha + 1),
              T.stretched.r2 >= 0.98 && T.stretched.slope < 0.0,
              F::fmt("R2 %.5f, slope %.4f", T.stretched.r2, T.stretched.slope));
    });
  }
  return c.finish();
}

bool criterion3() {
  Criterion c(3, "freezing transition", 300);
  c.guard("power_flat v0=0.4", [&] {
    const TransferModel& m = power_flat_04();
    for (double t : kGrid) (void)pf_pressure(t);
    const FreezeReport r = m.freeze_scan(kGrid, 8);
    std::string trend;
    bool decreasing = true;
    for (std::size_t i = 0; i < r.chi_trend.size(); ++i) {
      trend += F::fmt("%s%d:%.4f", i ? " " : "", r.chi_trend[i].n, r.chi_trend[i].chi_inf);
      if (i > 0) decreasing = decreasing && r.chi_trend[i].chi_inf <= r.chi_trend[i - 1].chi_inf;
    }
    const double last = r.chi_trend.back().chi_inf;
    c.check("chi_inf decreases below 0.05 by n_max = 10^4", decreasing && last < 0.05, trend);
    bool positive = true;
    std::string vals;
    for (double t : kGrid) {
      if (t > 0.9) continue;
      const PressureBracket& P = pf_pressure(t);
      positive = positive && P.lo > 0.0;
      vals += F::fmt("%s%.2f:[%.4f,%.4f]", vals.empty() ? "" : " ", t, P.lo, P.hi);
    }
    c.check("P(t) > 0 for t <= 0.9", positive, vals);
    const PressureBracket& P1 = pf_pressure(1.0);
    c.check("P(1) <= 0.02", P1.hi <= 0.02, F::fmt("[%.3e, %.3e]", P1.lo, P1.hi));
    c.check("t+ estimate", r.t_plus_found && std::abs(r.t_plus - 1.0) <= 0.05 + 1e-12,
            F::fmt("t+ = %.2f, acim integral %.4f", r.t_plus, r.acim_integral));
  });
  c.guard("Chebyshev control", [&] {
    const auto f = make(Family::Chebyshev);
    const TransferModel m(build_scheme(f, nice_interval(*f), kNmax, 1e-13));
    const FreezeReport r = m.freeze_scan({0.5, 1.0}, 8);
    double lowest = kInf;
    for (const ChiTrendRow& row : r.chi_trend) lowest = std::min(lowest, row.chi_inf);
    c.check("Chebyshev chi_inf >= 0.6 at all depths", lowest >= 0.6, F::fmt("min %.4f", lowest));
  });
  return c.finish();
}

bool criterion4() {
  Criterion c(4, "equilibrium invariants", 120);
  const TransferModel& m = power_flat_04();
  const double log_k = std::log(m.scheme().interval.K_tau);
  for (double t : kGrid) {
    c.guard(F::fmt("t=%.2f", t), [&] {
      const PressureBracket& P = pf_pressure(t);
      const GibbsCylinderMeasure g1 = m.gibbs_cylinders(t, P.mid(), 1);
      const GibbsCylinderMeasure g2 = m.gibbs_cylinders(t, P.mid(), 2);
      double s1 = 0.0, s2 = 0.0;
      for (double w : g1.weights) s1 += w;
      for (double w : g2.weights) s2 += w;
      const double norm_err = std::max(std::abs(s1 - 1.0), std::abs(s2 - 1.0));
      const RefinementCheck rc = m.refinement_consistency(g1, g2);
      const EquilibriumReport eq = m.equilibrium_at(P, {});
      const bool ok = norm_err <= 1e-12 && rc.pass && eq.identity_residual <= P.width() + 0.02 &&
                      eq.kac_defect <= 0.05 && eq.chi > 0.0;
      c.check(F::fmt("t=%.2f", t), ok,
              F::fmt("norm %.1e, refine [%.3f, %.3f] vs %.3f, |h-t chi-P| %.2e (<= %.2e), Kac %.2e, chi %.4f",
                     norm_err, rc.min_log_ratio, rc.max_log_ratio, std::abs(t) * log_k, eq.identity_residual,
                     P.width() + 0.02, eq.kac_defect, eq.chi));
    });
  }
  return c.finish();
}

bool criterion5() {
  Criterion c(5, "decay regimes", 600);
  const Observable x = parse_observable("x");
  c.guard("Gibbs t=0.8", [&] {
    const TransferModel& m = power_flat_04();
    CorrelationSource src;
    src.kind = CorrelationSourceKind::GibbsMeasure;
    src.t = 0.8;
    src.model = &m;
    const CorrelationSeries s = correlation_series(*m.scheme().map, x, x, 200, 1, 10'000'000, src);
    const DecayFit fit = decay_fit(s, kAllDecayModels, 10);
    std::string all;
    for (const DecayCandidate& d : fit.candidates) {
      all += F::fmt(" %s(param %.3f, adjR2 %.4f)", std::string(decay_model_name(d.model)).c_str(), d.param,
                    d.adjusted_r2);
    }
    c.check("mu_0.8 of power_flat v0=0.4: exponential best, r < 1, R2 >= 0.95",
            fit.best.model == DecayModel::Exponential && fit.best.param < 1.0 && fit.best.r2 >= 0.95,
            F::fmt("lags %d..%d:", fit.n_lo, fit.n_hi) + all);
  });
  c.guard("acip v0=0.5", [&] {
    const auto f = make(Family::PowerFlat, 0.5);
    const CorrelationSeries s = correlation_series(*f, x, x, 1000, 1, 10'000'000, {});
    const DecayFit fit = decay_fit(s, kAllDecayModels, 10);
    double poly = kNaN;
    std::string all;
    for (const DecayCandidate& d : fit.candidates) {
      if (d.model == DecayModel::Polynomial) poly = d.param;
      all += F::fmt(" %s(param %.3f, adjR2 %.4f)", std::string(decay_model_name(d.model)).c_str(), d.param,
                    d.adjusted_r2);
    }
    c.check("acip of power_flat v0=0.5: polynomial best, exponent in [-1.6, -0.7]",
            fit.best.model == DecayModel::Polynomial && poly >= -1.6 && poly <= -0.7,
            F::fmt("lags %d..%d:", fit.n_lo, fit.n_hi) + all);
  });
  return c.finish();
}

bool criterion6() {
  Criterion c(6, "central limit theorem", 300);
  for (const auto& f : {make(Family::Chebyshev), make(Family::PowerFlat, 0.4)}) {
    const std::string name(family_name(f->spec().family));
    c.guard(name, [&] {
      const double mean = birkhoff_average(*f, parse_observable("x"), 99, 1000, 1'000'000);
      Observable phi = parse_observable("x");
      phi.shift = mean;
      const CltReport r = clt_test(*f, phi, 10'000, 1000, 1);
      c.check(name + " KS < 0.08", r.ks_distance < 0.08,
              F::fmt("KS %.4f, sigma %.4f, centered at %.5f", r.ks_distance, r.sigma, mean));
    });
  }
  c.guard("coboundary", [&] {
    const auto f = make(Family::PowerFlat, 0.4);
    const CltReport r = clt_test(*f, parse_observable("cob_x"), 10'000, 1000, 1);
    c.check("coboundary flagged with sigma2 < 1e-3", r.coboundary && r.sigma2 < 1e-3, F::fmt("sigma2 %.2e", r.sigma2));
  });
  return c.finish();
}

bool criterion7() {
  Criterion c(7, "weak limit", 600);
  c.guard("power_flat v0=0.4", [&] {
    const TransferModel& m = power_flat_04();
    const WeakLimitReport r = weak_limit_scan(m, {0.9, 0.95, 0.99}, holder_suite(), 8, {1, 1000, 1'000'000});
    std::string d;
    for (std::size_t i = 0; i < r.t.size(); ++i) d += F::fmt("%s%.2f:%.4f", i ? " " : "", r.t[i], r.max_discrepancy[i]);
    c.check("max discrepancy nonincreasing along t", r.monotone, d);
    const double phi4 = r.tent_mass.back()[0];
    c.check("integral of phi_4 under mu_0.99 <= 0.1", phi4 <= 0.1,
            F::fmt("phi_4 %.4f, phi_8 %.4f, phi_16 %.4f", phi4, r.tent_mass.back()[1], r.tent_mass.back()[2]));
  });
  return c.finish();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool criterion8() {
  Criterion c(8, "determinism", 600);
  const fs::path root = fs::temp_directory_path() / "flatcrit-acceptance-determinism";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"chebyshev", R"({"map":{"family":"chebyshev"},"scheme":{"n_max":500},
        "stats":{"N":1000000,"samples":200,"clt_N":5000}})"},
      {"power_flat", R"({"map":{"family":"power_flat","v0":0.4},"scheme":{"n_max":2000},
        "thermo":{"t_grid":[0.6,0.9,0.99]},
        "stats":{"N":1000000,"samples":200,"clt_N":5000,"correlation_source":"gibbs","weak_t_grid":[0.9,0.99]}})"},
  };
  for (const auto& [name, text] : configs) {
    c.guard(name, [&] {
      RunConfig cfg = parse_config(text);
      std::ostringstream log;
      // Run 1 and 2 start from empty caches; run 3 reuses the cache of run 1.
      for (const char* run : {"a", "b", "a2"}) {
        cfg.outputs.dir = (root / name / run).string();
        if (std::string(run) == "a2") cfg.scheme.cache_path = (root / name / "a" / "cache").string();
        if (execute(cfg, Command::All, log) != 0) throw Error(ErrorKind::Io, "execute failed: " + log.str());
      }
      int files = 0, same = 0;
      for (const auto& e : fs::directory_iterator(root / name / "a")) {
        if (e.path().extension() != ".csv") continue;
        ++files;
        const std::string ref = slurp(e.path());
        if (ref == slurp(root / name / "b" / e.path().filename()) &&
            ref == slurp(root / name / "a2" / e.path().filename())) {
          ++same;
        }
      }
      c.check(name + " byte-identical CSVs over three runs", files > 0 && same == files,
              F::fmt("%d of %d files identical", same, files));
    });
  }
  return c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<bool()>> all = {criterion1, criterion2, criterion3, criterion4,
                                                  criterion5, criterion6, criterion7, criterion8};
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  std::string summary;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const bool ok = all[k]();
    failed += ok ? 0 : 1;
    summary += F::fmt("%s%d:%s", summary.empty() ? "" : " ", id, ok ? "PASS" : "FAIL");
  }
  std::printf("acceptance summary: %s\n", summary.c_str());
  return failed == 0 ? 0 : 1;
}
