#include <functional>
#include <map>

#include "doctest.h"
#include "flatcrit/error.hpp"
#include "flatcrit/inducing.hpp"

using namespace flatcrit;

namespace {

std::shared_ptr<const FlatUnimodalMap> make(Family family, double param = 0.0) {
  MapSpec s;
  s.family = family;
  if (family == Family::PowerFlat) s.v0 = param;
  if (family == Family::LogFlat) s.alpha = param;
  return std::make_shared<const FlatUnimodalMap>(s);
}

double cheb(double x) { return 4.0 * x * (1.0 - x); }

double bisect_plain(const std::function<double(double)>& g, double a, double b) {
  double ga = g(a);
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    const double gm = g(m);
    if ((gm < 0.0) == (ga < 0.0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("Chebyshev nice interval") {
  const auto f = make(Family::Chebyshev);
  const NiceInterval I = nice_interval(*f);
  CHECK(std::abs(I.a_minus - 0.25) <= 1e-12);
  CHECK(std::abs(I.a_plus - 0.75) <= 1e-12);
  CHECK(I.K_tau == doctest::Approx((1 + I.tau) * (1 + I.tau) / I.tau));
}

TEST_CASE("flat family boundary orbit") {
  const auto f = make(Family::PowerFlat, 0.4);
  const NiceInterval I = nice_interval(*f);
  // a+ is fixed and a- maps onto it.
  CHECK(f->value(I.a_plus) == doctest::Approx(I.a_plus).epsilon(1e-14));
  CHECK(f->value(I.a_minus) == doctest::Approx(I.a_plus).epsilon(1e-14));
}

TEST_CASE("attracting fixed point is rejected") {
  MapSpec s;
  s.family = Family::PowerFlat;
  s.endpoint_slope = 0.5;
  const FlatUnimodalMap f(s);
  try {
    (void)nice_interval(f);
    FAIL("expected NotNice");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotNice);
  }
}

TEST_CASE("Chebyshev ladder: two branches per return time") {
  const auto f = make(Family::Chebyshev);
  const NiceInterval I = nice_interval(*f);
  const InducingScheme S = build_scheme(f, I, 20, 1e-13);
  std::map<int, int> count;
  for (const Branch& b : S.branches) count[b.R] += 1;
  CHECK(count.size() == 19);
  for (int n = 2; n <= 20; ++n) CHECK(count[n] == 2);

  double total = std::exp(S.log_tail.back());
  for (const Branch& b : S.branches) total += b.lebesgue();
  CHECK(std::abs(total - I.length()) <= 1e-10);

  // J_0^+: the R=2 branch right of c, endpoints solve f^2(x) = 3/4 and f^2(x) = 1/4.
  // Inverting 4x(1-x) = t twice gives x = (1 + sqrt(1 - y)) / 2 with y = (1 + sqrt(1 - t)) / 2.
  auto pre2 = [](double t) { return 0.5 * (1.0 + std::sqrt(1.0 - 0.5 * (1.0 + std::sqrt(1.0 - t)))); };
  const double e1 = pre2(0.75), e2 = pre2(0.25);
  const Branch& j0 = S.branches[S.find(Side::Right, 2)];
  CHECK(std::abs(f->to_plain(j0.lo) - std::min(e1, e2)) <= 1e-12);
  CHECK(std::abs(f->to_plain(j0.hi) - std::max(e1, e2)) <= 1e-12);
  // Bisection on f^2 agrees with the radicals.
  CHECK(std::abs(bisect_plain([](double x) { return cheb(cheb(x)) - 0.25; }, 0.5 + 1e-9, 0.74) - e2) <= 1e-13);
}

TEST_CASE("return times") {
  const auto f = make(Family::Chebyshev);
  const NiceInterval I = nice_interval(*f);
  // f(0.7) = 0.84 is outside I, f^2(0.7) = 0.5376 is inside.
  CHECK(return_time(*f, I, ChartPoint::plain(0.7)) == 2);
  CHECK_THROWS_AS((void)return_time(*f, I, ChartPoint::plain(0.9)), Error);
  const InducingScheme S = build_scheme(f, I, 20, 1e-13);
  for (const Branch& b : S.branches) {
    const ChartPoint mid = ChartPoint::near_c(b.side, b.u_mid());
    CHECK(return_time(*f, I, mid) == b.R);
  }
}

TEST_CASE("closed-form enumeration agrees with lap tracking") {
  for (const auto& f : {make(Family::Chebyshev), make(Family::PowerFlat, 0.4), make(Family::LogFlat, 1.0)}) {
    const NiceInterval I = nice_interval(*f);
    const InducingScheme A = build_scheme(f, I, 12, 1e-13);
    const InducingScheme B = lap_tracker_scheme(*f, I, 12, 1e-13);
    REQUIRE(A.branches.size() == B.branches.size());
    for (std::size_t i = 0; i < A.branches.size(); ++i) {
      CHECK(A.branches[i].R == B.branches[i].R);
      CHECK(A.branches[i].side == B.branches[i].side);
      CHECK(A.branches[i].log_measure == doctest::Approx(B.branches[i].log_measure).epsilon(1e-4));
    }
  }
}

TEST_CASE("partition identity for flat schemes") {
  for (const auto& f : {make(Family::PowerFlat, 0.4), make(Family::LogFlat, 2.0)}) {
    const NiceInterval I = nice_interval(*f);
    const InducingScheme S = build_scheme(f, I, 3000, 1e-13);
    const TailTable T = tail_statistics(S);
    CHECK(T.max_partition_residual <= 1e-10);
    for (std::size_t i = 1; i < T.rows.size(); ++i) CHECK(T.rows[i].log_tail <= T.rows[i - 1].log_tail);
  }
}

TEST_CASE("Chebyshev tail is geometric") {
  const auto f = make(Family::Chebyshev);
  const InducingScheme S = build_scheme(f, nice_interval(*f), 60, 1e-13);
  const TailTable T = tail_statistics(S);
  // Near c the first return takes one more step each time |x - c| halves.
  CHECK(T.tail_ratio == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("induced derivative") {
  const auto f = make(Family::Chebyshev);
  const NiceInterval I = nice_interval(*f);
  const InducingScheme S = build_scheme(f, I, 20, 1e-13);
  const Branch& b = S.branches[S.find(Side::Right, 2)];
  const double x = f->to_plain(ChartPoint::near_c(b.side, b.u_mid()));
  const double chain = std::log(std::abs(4 - 8 * x)) + std::log(std::abs(4 - 8 * cheb(x)));
  CHECK(induced_log_derivative(S, b, ChartPoint::plain(x)) == doctest::Approx(chain).epsilon(1e-12));
  CHECK_THROWS_AS((void)induced_log_derivative(S, S.branches[S.find(Side::Right, 3)], ChartPoint::plain(x)), Error);
}

TEST_CASE("Koebe distortion inside branches") {
  for (const auto& f : {make(Family::Chebyshev), make(Family::PowerFlat, 0.4), make(Family::LogFlat, 1.0)}) {
    const NiceInterval I = nice_interval(*f);
    const InducingScheme S = build_scheme(f, I, 500, 1e-13);
    for (const Branch& b : S.branches) {
      CHECK(b.log_df_max() - b.log_df_min() <= std::log(I.K_tau) + 1e-9);
    }
  }
}

TEST_CASE("deep flat branches follow the near-critical derivative estimate") {
  const auto f = make(Family::PowerFlat, 0.4);
  const InducingScheme S = build_scheme(f, nice_interval(*f), 2000, 1e-13);
  for (int R : {20, 200, 2000}) {
    const Branch& b = S.branches[S.find(Side::Right, R)];
    const double u = b.u_mid();
    const ChartPoint x = ChartPoint::near_c(Side::Right, u);
    // |Dl log|x-c| + l/(x-c)| with l = e^{0.4u}.
    const double ell = std::exp(0.4 * u), d_ell = -0.4 * std::exp(1.4 * u);
    const double estimate = std::log(std::abs(d_ell * (-u) + ell * std::exp(u)));
    CHECK(std::abs(induced_log_derivative(S, b, x) - estimate) <= std::log(10.0));
  }
}

TEST_CASE("scheme cache round trip") {
  const auto f = make(Family::PowerFlat, 0.5);
  const InducingScheme S = build_scheme(f, nice_interval(*f), 300, 1e-13);
  const std::string text = scheme_to_json(S);
  const InducingScheme B = scheme_from_json(text, f);
  REQUIRE(B.branches.size() == S.branches.size());
  for (std::size_t i = 0; i < S.branches.size(); ++i) {
    CHECK(B.branches[i].R == S.branches[i].R);
    CHECK(B.branches[i].lo == S.branches[i].lo);
    CHECK(B.branches[i].log_measure == S.branches[i].log_measure);
  }
  CHECK(scheme_to_json(B) == text);
  CHECK_THROWS_AS(scheme_from_json(text, make(Family::PowerFlat, 0.4)), Error);
}
