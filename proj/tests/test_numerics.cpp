#include <algorithm>
#include <charconv>
#include <cstring>
#include <random>

#include "doctest.h"
#include "flatcrit/error.hpp"
#include "flatcrit/numerics.hpp"

using namespace flatcrit;

TEST_CASE("LogSum matches direct summation and merges") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-30.0, 5.0);
  LogSum a, b, all;
  double direct = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double v = d(rng);
    direct += std::exp(v);
    (i % 2 ? a : b).add(v);
    all.add(v);
  }
  a.merge(b);
  CHECK(all.value() == doctest::Approx(std::log(direct)).epsilon(1e-14));
  CHECK(a.value() == doctest::Approx(all.value()).epsilon(1e-14));
  CHECK(LogSum{}.value() == -kInf);
}

TEST_CASE("log_add_exp and log_diff_exp stay finite far from zero") {
  CHECK(log_add_exp(-1000.0, -1000.0) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_diff_exp(std::log(3.0), std::log(2.0)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(log_diff_exp(-800.0, -801.0) == doctest::Approx(-800.0 + std::log1p(-std::exp(-1.0))));
}

TEST_CASE("linear_fit recovers an exact line") {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(-1.5 * i + 2.0);
  }
  const LinearFit f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(-1.5).epsilon(1e-13));
  CHECK(f.intercept == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(f.points == 20);
}

TEST_CASE("bisect finds sqrt 2 and rejects brackets without a sign change") {
  const double r = bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0, 0.0);
  CHECK(std::abs(r - std::sqrt(2.0)) <= 4e-16);
  CHECK_THROWS_AS(bisect([](double x) { return x * x + 1.0; }, 0.0, 2.0, 0.0), Error);
}

TEST_CASE("format_double round-trips random doubles") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t bits = rng();
    double x;
    std::memcpy(&x, &bits, sizeof x);
    if (!std::isfinite(x)) continue;
    const std::string s = format_double(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == x);
  }
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("substreams are deterministic and distinct") {
  CHECK(substream_seed(1, 0) == substream_seed(1, 0));
  CHECK(substream_seed(1, 0) != substream_seed(1, 1));
  CHECK(substream_seed(1, 0) != substream_seed(2, 0));
}

TEST_CASE("parallel_chunks covers every chunk once for any worker count") {
  for (int w : {1, 2, 5}) {
    set_worker_count(w);
    std::vector<int> hits(37, 0);
    parallel_chunks(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  set_worker_count(1);
}

TEST_CASE("KS distance of a normal sample is small, of a shifted one is not") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> z(20000), shifted(20000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = g(rng);
    shifted[i] = z[i] + 0.5;
  }
  // 1.63 / sqrt(n) is the 1% critical value.
  CHECK(ks_distance_normal(z) < 1.63 / std::sqrt(20000.0));
  CHECK(ks_distance_normal(shifted) > 0.15);
}
