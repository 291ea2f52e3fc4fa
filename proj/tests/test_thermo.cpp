#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "flatcrit/error.hpp"
#include "flatcrit/thermo.hpp"

using namespace flatcrit;

namespace {

std::shared_ptr<const FlatUnimodalMap> make(Family family, double param = 0.0) {
  MapSpec s;
  s.family = family;
  if (family == Family::PowerFlat) s.v0 = param;
  if (family == Family::LogFlat) s.alpha = param;
  return std::make_shared<const FlatUnimodalMap>(s);
}

const InducingScheme& chebyshev_scheme() {
  static const InducingScheme s = [] {
    auto f = make(Family::Chebyshev);
    return build_scheme(f, nice_interval(*f), 200, 1e-13);
  }();
  return s;
}

const TransferModel& chebyshev_model() {
  static const TransferModel m(chebyshev_scheme());
  return m;
}

const TransferModel& power_flat_model() {
  static const InducingScheme s = [] {
    auto f = make(Family::PowerFlat, 0.4);
    return build_scheme(f, nice_interval(*f), 2000, 1e-13);
  }();
  static const TransferModel m(s);
  return m;
}

// Lyapunov exponent of the Chebyshev acip from its density 1/(pi sqrt(x(1-x))).
double chebyshev_chi_oracle() {
  boost::math::quadrature::tanh_sinh<double> q;
  const double pi = 3.14159265358979323846;
  auto g = [&](double x) { return std::log(std::abs(4.0 - 8.0 * x)) / (pi * std::sqrt(x * (1.0 - x))); };
  return q.integrate(g, 0.0, 0.5) + q.integrate(g, 0.5, 1.0);
}

const std::vector<double> kGrid = {0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0, 1.05, 1.1};

}  // namespace

TEST_CASE("Chebyshev level sum at t=0, p=log 2 is the geometric series") {
  const InducingScheme& S = chebyshev_scheme();
  const LevelSum L = level_sum(S, 0.0, std::log(2.0));
  // sum_{n=2}^{n_max} 2 * 2^{-n}
  CHECK(L.value == doctest::Approx(1.0 - std::ldexp(1.0, 1 - S.n_max)).epsilon(1e-13));
  CHECK(L.value + L.truncation_bound >= 1.0 - 1e-13);
  CHECK(L.upper == doctest::Approx(L.value));
}

TEST_CASE("level sum decreases in p and diverges below the growth threshold") {
  const InducingScheme& S = chebyshev_scheme();
  double prev = kInf;
  for (double p = 0.1; p < 2.0; p += 0.1) {
    const double v = level_sum(S, 0.0, p).value;
    CHECK(v < prev);
    prev = v;
  }
  try {
    (void)level_sum(S, 0.0, -0.1);
    FAIL("expected Divergent");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Divergent);
  }
}

TEST_CASE("pressure brackets at fixed p") {
  const TransferModel& m = chebyshev_model();
  const PressureBracket b = m.pressure_bracket(0.0, std::log(2.0), 4);
  CHECK(b.contains(0.0));
  CHECK(b.width() <= b.truncation_error + 1e-12);

  const TransferModel& pf = power_flat_model();
  const double log_k = std::log(pf.scheme().interval.K_tau);
  for (int depth : {1, 2, 8}) {
    const PressureBracket c = pf.pressure_bracket(1.0, 0.05, depth);
    CHECK(c.width() <= log_k / depth + c.truncation_error);
  }
}

TEST_CASE("upper bound is convex in p") {
  const TransferModel& pf = power_flat_model();
  std::vector<double> hi;
  for (int k = 0; k <= 20; ++k) hi.push_back(pf.pressure_bracket(0.8, 0.05 + 0.01 * k, 8).hi);
  for (std::size_t k = 1; k + 1 < hi.size(); ++k) CHECK(hi[k - 1] + hi[k + 1] - 2.0 * hi[k] >= -1e-9);
}

TEST_CASE("Chebyshev pressure") {
  const TransferModel& m = chebyshev_model();
  const PressureBracket p0 = m.solve_pressure(0.0, 8);
  CHECK(p0.contains(std::log(2.0)));
  CHECK(p0.width() <= 0.01);
  // P(1) = h - chi = 0 with chi from the density oracle (good to about 1e-8 at the
  // log singularity).
  CHECK(chebyshev_chi_oracle() == doctest::Approx(std::log(2.0)).epsilon(1e-7));
  const PressureBracket p1 = m.solve_pressure(1.0, 8);
  CHECK(p1.contains(0.0));
  CHECK(p1.width() <= 0.05);
}

TEST_CASE("power-flat pressure at t=1 is not positive") {
  const PressureBracket p = power_flat_model().solve_pressure(1.0, 8);
  CHECK(p.hi <= 0.02);
}

TEST_CASE("Chebyshev Gibbs weights at t=0 are 2^-R") {
  const TransferModel& m = chebyshev_model();
  const GibbsCylinderMeasure g = m.gibbs_cylinders(0.0, std::log(2.0), 1);
  double norm = 0.0, total = 0.0;
  for (int R : g.returns) norm += std::ldexp(1.0, -R);
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    CHECK(g.weights[i] == doctest::Approx(std::ldexp(1.0, -g.returns[i]) / norm).epsilon(1e-10));
    total += g.weights[i];
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("Gibbs normalization and refinement consistency along the grid") {
  for (const TransferModel* m : {&chebyshev_model(), &power_flat_model()}) {
    for (double t : kGrid) {
      const PressureBracket P = m->solve_pressure(t, 8);
      const GibbsCylinderMeasure g1 = m->gibbs_cylinders(t, P.mid(), 1);
      const GibbsCylinderMeasure g2 = m->gibbs_cylinders(t, P.mid(), 2);
      double total = 0.0;
      for (double w : g2.weights) total += w;
      CHECK(std::abs(total - 1.0) <= 1e-12);
      const RefinementCheck rc = m->refinement_consistency(g1, g2);
      CHECK(rc.pass);
      CHECK(rc.bound == doctest::Approx(t * std::log(m->scheme().interval.K_tau)));
    }
  }
}

TEST_CASE("equilibrium states") {
  const TransferModel& m = chebyshev_model();
  const double chi = chebyshev_chi_oracle();
  const EquilibriumReport r1 = m.equilibrium_report(1.0, 8, parse_observables({"x", "one"}));
  CHECK(std::abs(r1.chi - chi) <= 0.01);
  CHECK(r1.observable_expectations.at("one") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r1.observable_expectations.at("x") == doctest::Approx(0.5).epsilon(1e-6));
  const EquilibriumReport r5 = m.equilibrium_report(0.5, 2, {});
  CHECK(r5.kac_defect <= 0.02);

  const TransferModel& pf = power_flat_model();
  for (double t : kGrid) {
    try {
      const EquilibriumReport r = pf.equilibrium_report(t, 8, {});
      CHECK(r.chi > 0.0);
      CHECK(r.identity_residual <= r.P.width() + 0.02);
    } catch (const Error& e) {
      // Beyond the freezing point the truncated branches may dominate the return-time moment.
      CHECK(e.kind() == ErrorKind::TailDominated);
      CHECK(t > 1.0);
    }
  }
}

TEST_CASE("freezing diagnostics") {
  const FreezeReport ch = chebyshev_model().freeze_scan({0.5, 1.0}, 8);
  // Every Chebyshev periodic orbit has multiplier at least 2 per step.
  for (const ChiTrendRow& r : ch.chi_trend) CHECK(r.chi_inf >= 0.6);
  boost::math::quadrature::tanh_sinh<double> q;
  auto g = [](double x) { return std::log(std::abs(4.0 - 8.0 * x)); };
  const double oracle = q.integrate(g, 0.0, 0.5) + q.integrate(g, 0.5, 1.0);
  CHECK(oracle == doctest::Approx(std::log(4.0) - 1.0).epsilon(1e-10));
  CHECK(ch.acim_integral == doctest::Approx(oracle).epsilon(1e-8));

  const FreezeReport pf = power_flat_model().freeze_scan({0.2, 0.4, 0.6, 0.8, 0.9}, 8);
  for (const FreezeRow& r : pf.rows) CHECK(r.sign == FreezeRow::Sign::Positive);
  for (std::size_t i = 1; i < pf.chi_trend.size(); ++i) CHECK(pf.chi_trend[i].chi_inf <= pf.chi_trend[i - 1].chi_inf);
  CHECK(pf.acim_finite);
}
