#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace flatcrit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Streaming log(sum exp(v_i)).
class LogSum {
 public:
  void add(double log_value) {
    if (log_value == -kInf) return;
    if (log_value <= max_) {
      sum_ += std::exp(log_value - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_value) + 1.0;
      max_ = log_value;
    }
  }
  void merge(const LogSum& other) {
    if (other.max_ == -kInf) return;
    add_scaled(other.max_, other.sum_);
  }
  double value() const { return max_ == -kInf ? -kInf : max_ + std::log(sum_); }

 private:
  void add_scaled(double log_max, double sum) {
    if (log_max <= max_) {
      sum_ += sum * std::exp(log_max - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_max) + sum;
      max_ = log_max;
    }
  }
  double max_ = -kInf;
  double sum_ = 0.0;
};

// log(exp(a) - exp(b)) for a > b.
double log_diff_exp(double a, double b);
double log_add_exp(double a, double b);

struct LinearFit {
  double slope = kNaN;
  double intercept = kNaN;
  double r2 = kNaN;
  std::size_t points = 0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Bisection on a sign change of f over [a, b]; returns the midpoint of the final bracket.
double bisect(const std::function<double(double)>& f, double a, double b, double x_tol,
              int max_iter = 400);

// Deterministic RNG seeding: splitmix64 finalizer of (seed, stream).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream);

// Uniform double in the open interval (0, 1) from 53 random bits.
template <class Rng>
double uniform_open01(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

// Shortest round-trip decimal representation.
std::string format_double(double x);
// Fixed 17 significant digits (cache endpoints).
std::string format_17(double x);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);

// Worker-count knob for chunked parallel loops. Chunking is fixed by the caller,
// so results never depend on the worker count.
void set_worker_count(int workers);
int worker_count();

// Runs body(chunk_index) for every chunk in [0, chunks); the order of side effects
// across chunks is unspecified, so bodies must write to disjoint slots.
void parallel_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body);

// Kolmogorov-Smirnov distance of a sample to the standard normal law.
double ks_distance_normal(std::vector<double> standardized);

}  // namespace flatcrit
