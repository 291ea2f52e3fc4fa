#include <boost/math/quadrature/tanh_sinh.hpp>
#include <random>

#include "doctest.h"
#include "flatcrit/error.hpp"
#include "flatcrit/numerics.hpp"
#include "flatcrit/stats.hpp"

using namespace flatcrit;

namespace {

std::shared_ptr<const FlatUnimodalMap> make(Family family, double param = 0.0) {
  MapSpec s;
  s.family = family;
  if (family == Family::PowerFlat) s.v0 = param;
  if (family == Family::LogFlat) s.alpha = param;
  return std::make_shared<const FlatUnimodalMap>(s);
}

// Integral of g against the Chebyshev acip density 1/(pi sqrt(x(1-x))).
double chebyshev_density_integral(const std::function<double(double)>& g) {
  boost::math::quadrature::tanh_sinh<double> q;
  const double pi = 3.14159265358979323846;
  auto h = [&](double x) { return g(x) / (pi * std::sqrt(x * (1.0 - x))); };
  return q.integrate(h, 0.0, 0.5) + q.integrate(h, 0.5, 1.0);
}

CorrelationSeries synthetic(const std::function<double(double)>& f, int n_max) {
  CorrelationSeries s;
  s.lags = correlation_lags(n_max);
  for (int n : s.lags) s.cor.push_back(f(n));
  s.noise_floor = 1e-12;
  return s;
}

}  // namespace

TEST_CASE("Birkhoff averages against the Chebyshev density") {
  const auto f = make(Family::Chebyshev);
  CHECK(birkhoff_average(*f, parse_observable("one"), 1, 100, 1000) == 1.0);
  const auto av = birkhoff_averages(*f, parse_observables({"log_df", "x"}), 1, 1000, 1'000'000);
  const double chi = chebyshev_density_integral([](double x) { return std::log(std::abs(4.0 - 8.0 * x)); });
  const double mean_x = chebyshev_density_integral([](double x) { return x; });
  CHECK(mean_x == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(std::abs(av[0] - chi) <= 0.01);
  CHECK(std::abs(av[1] - mean_x) <= 0.005);
}

TEST_CASE("averages of coboundaries vanish") {
  const auto f = make(Family::PowerFlat, 0.4);
  const long N = 1'000'000;
  const OrbitSeries s = orbit_series(*f, parse_observable("x"), 4, 1000, N);
  double sd = 0.0, mean = 0.0;
  for (double v : s.values) mean += v / N;
  for (double v : s.values) sd += (v - mean) * (v - mean) / N;
  sd = std::sqrt(sd);
  const double cob = birkhoff_average(*f, parse_observable("cob_x"), 4, 1000, N);
  CHECK(std::abs(cob) <= 2.0 * sd / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("orbits are deterministic and independent of the worker count") {
  const auto f = make(Family::PowerFlat, 0.5);
  const Observable x = parse_observable("x");
  set_worker_count(1);
  const CorrelationSeries a = correlation_series(*f, x, x, 50, 9, 6'000'000, {});
  set_worker_count(3);
  const CorrelationSeries b = correlation_series(*f, x, x, 50, 9, 6'000'000, {});
  set_worker_count(1);
  CHECK(a.cor == b.cor);
  CHECK(orbit_series(*f, x, 2, 10, 1000).values == orbit_series(*f, x, 2, 10, 1000).values);
  CHECK(orbit_series(*f, x, 2, 10, 1000).values != orbit_series(*f, x, 3, 10, 1000).values);
}

TEST_CASE("correlation series basics") {
  const auto f = make(Family::Chebyshev);
  const Observable x = parse_observable("x-0.5");
  const CorrelationSeries s = correlation_series(*f, x, x, 40, 1, 10'000'000, {});
  CHECK(s.lags.front() == 0);
  CHECK(s.cor.front() >= 0.0);
  CHECK(s.cor.front() == doctest::Approx(s.var_phi).epsilon(1e-9));
  // Var(x) under the arcsine law is 1/8.
  CHECK(s.var_phi == doctest::Approx(0.125).epsilon(0.01));
  for (std::size_t l = 0; l < s.lags.size(); ++l) {
    if (s.lags[l] >= 5) CHECK(std::abs(s.cor[l]) < s.noise_floor);
  }
  try {
    (void)correlation_series(*f, x, parse_observable("one"), 10, 1, 10000, {});
    FAIL("expected DegenerateObservable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateObservable);
  }
}

TEST_CASE("decay fits on synthetic series") {
  const DecayFit e = decay_fit(synthetic([](double n) { return 0.3 * std::pow(0.8, n); }, 100));
  CHECK(e.best.model == DecayModel::Exponential);
  CHECK(e.best.param == doctest::Approx(0.8).epsilon(1e-10));

  const DecayFit p = decay_fit(synthetic([](double n) { return 2.0 * std::pow(n, -1.2); }, 1000));
  CHECK(p.best.model == DecayModel::Polynomial);
  CHECK(p.best.param == doctest::Approx(-1.2).epsilon(1e-10));

  const DecayFit s = decay_fit(synthetic([](double n) { return std::exp(-0.7 * std::pow(n, 0.35)); }, 1000));
  CHECK(s.best.model == DecayModel::Stretched);
  CHECK(s.best.param == doctest::Approx(0.35).epsilon(1e-10));

  // n_min drops the head of the series.
  const DecayFit tail = decay_fit(synthetic([](double n) { return 0.3 * std::pow(0.9, n); }, 100), kAllDecayModels, 10);
  CHECK(tail.n_lo == 10);

  CorrelationSeries flat = synthetic([](double) { return 1e-14; }, 100);
  CHECK_THROWS_AS(decay_fit(flat), Error);
  CHECK(parse_decay_model("polynomial") == DecayModel::Polynomial);
}

TEST_CASE("tail-sum bound check") {
  const auto ch = make(Family::Chebyshev);
  const TailSumReport c = tail_sum_bound_check(build_scheme(ch, nice_interval(*ch), 200, 1e-13), 0.5);
  CHECK_FALSE(c.polynomial);
  CHECK_FALSE(c.in_window);

  const auto pf = make(Family::PowerFlat, 0.5);
  const TailSumReport r = tail_sum_bound_check(build_scheme(pf, nice_interval(*pf), 10000, 1e-13), 0.5);
  CHECK(r.polynomial);
  CHECK(r.window_lo == doctest::Approx(-1.3));
  CHECK(r.window_hi == doctest::Approx(1.0 - 1.0 / 0.55 + 0.3));
}

TEST_CASE("CLT diagnostics") {
  const auto f = make(Family::Chebyshev);
  const CltReport r = clt_test(*f, parse_observable("x-0.5"), 10'000, 1000, 1);
  CHECK(r.ks_distance < 0.05);
  CHECK_FALSE(r.coboundary);
  // Internal cross-check of the two variance estimates.
  CHECK(r.green_kubo_relative_diff <= 0.2);

  const CltReport cob = clt_test(*f, parse_observable("cob_x"), 10'000, 200, 1);
  CHECK(cob.coboundary);
  CHECK(cob.sigma2 < 1e-3);
}

TEST_CASE("Gibbs sampler reproduces the lifted equilibrium state") {
  const auto pf = make(Family::PowerFlat, 0.4);
  const InducingScheme S = build_scheme(pf, nice_interval(*pf), 2000, 1e-13);
  const TransferModel model(S);
  for (double t : {0.4, 0.8}) {
    const PressureBracket P = model.solve_pressure(t, 8);
    const EquilibriumReport eq = model.equilibrium_at(P, parse_observables({"x", "sqrt_dist_c"}));
    const GibbsSampler sampler(model, t, P.mid());
    double sx = 0.0, sd = 0.0;
    const long N = 1'000'000;
    sampler.orbit(17, 1000, N, [&](ChartPoint x) {
      sx += pf->to_plain(x);
      sd += std::sqrt(pf->distance_to_c(x));
    });
    CHECK(std::abs(sx / N - eq.observable_expectations.at("x")) <= 3e-3);
    CHECK(std::abs(sd / N - eq.observable_expectations.at("sqrt_dist_c")) <= 3e-3);
    CHECK(sampler.acceptance_rate() > 0.0);
  }
}

TEST_CASE("weak-limit tables") {
  const auto pf = make(Family::PowerFlat, 0.4);
  const InducingScheme S = build_scheme(pf, nice_interval(*pf), 2000, 1e-13);
  const TransferModel model(S);
  const WeakLimitReport r = weak_limit_scan(model, {0.9, 0.99}, holder_suite(), 8, {1, 1000, 200'000});
  REQUIRE(r.tent_mass.size() == 2);
  for (const auto& m : r.tent_mass) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      CHECK(m[k] >= 0.0);
      CHECK(m[k] <= 1.0);
      if (k > 0) CHECK(m[k] <= m[k - 1]);
    }
  }
  for (const WeakLimitRow& row : r.rows) CHECK(row.diff == doctest::Approx(std::abs(row.mu_t - row.mu_ac)));
  CHECK_THROWS_AS(weak_limit_scan(model, {0.99, 0.9}, holder_suite(), 8), Error);
}
