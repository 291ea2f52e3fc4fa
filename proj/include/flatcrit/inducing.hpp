#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flatcrit/chart.hpp"
#include "flatcrit/map_model.hpp"
#include "flatcrit/numerics.hpp"

namespace flatcrit {

struct NiceInterval {
  double a_minus = 0.0;
  double a_plus = 0.0;
  double tau = 0.0;
  double K_tau = 0.0;

  double length() const { return a_plus - a_minus; }
  bool contains(double x) const { return x > a_minus && x < a_plus; }
};

NiceInterval nice_interval(const FlatUnimodalMap& map);

struct Branch {
  ChartPoint lo;
  ChartPoint hi;
  int R = 0;
  Side side = Side::Right;
  double log_measure = 0.0;
  // Log-distances of lo and hi to c.
  double u_lo = 0.0;
  double u_hi = 0.0;
  // log|Df^R| sampled at lo, midpoint and hi.
  double log_df_lo = 0.0;
  double log_df_mid = 0.0;
  double log_df_hi = 0.0;
  // The fixed point of f^R inside the branch and its multiplier log|Df^R|.
  double u_periodic = kNaN;
  double log_df_periodic = kNaN;

  double lebesgue() const { return std::exp(log_measure); }
  double u_near() const { return std::max(u_lo, u_hi); }
  double u_far() const { return std::min(u_lo, u_hi); }
  double u_mid() const;
  double log_df_min() const { return std::min({log_df_lo, log_df_mid, log_df_hi}); }
  double log_df_max() const { return std::max({log_df_lo, log_df_mid, log_df_hi}); }
  // Excursion index j = R - 2 (the number of steps spent near 0).
  int depth() const { return R - 2; }
};

struct InducingScheme {
  std::shared_ptr<const FlatUnimodalMap> map;
  NiceInterval interval;
  std::vector<Branch> branches;  // sorted by left endpoint
  int n_max = 0;
  double tol = 0.0;
  std::string map_fingerprint;
  double unresolved_mass = 0.0;
  double max_endpoint_residual = 0.0;
  // log|{R > n}| for n = 0..n_max.
  std::vector<double> log_tail;

  // Branch index with the given side and return time, or -1.
  int find(Side side, int R) const;
};

// The first excursion of a point of I for maps with f(c) = 1 and f(0) = f(1) = 0:
// x -> near 1 -> near 0 -> (left branch g) -> back into I. Points of I are addressed
// as (side, u) with x = c +- e^{-u}; points near 0 by s = -log x.
class Excursion {
 public:
  Excursion(std::shared_ptr<const FlatUnimodalMap> map, const NiceInterval& interval);

  const FlatUnimodalMap& map() const { return *map_; }
  const NiceInterval& interval() const { return interval_; }

  // g^{-k}(e^{-s}) in log coordinates; adds the log g' values at the k preimages.
  double pull_back(double s, int k, double& log_dg_sum) const;
  // g^k(e^{-s}) in log coordinates; adds the log g' values along the way.
  double push_forward(double s, int k, double& log_dg_sum) const;
  // f^2 of c +- e^{-u} in log coordinates; adds log|Df(x)| + log|Df(f(x))|.
  double enter(Side side, double u, double& log_df2) const;
  // Inverse of enter on the given side.
  double leave(Side side, double s, double& log_df2) const;

  // Boundary chain b_j = g^{-j}(a_minus) as s-values, and the corresponding log g'(b_j).
  double boundary_s(int j) const;
  double boundary_log_dg(int j) const;
  void extend_boundary(int j_max) const;

  // Pull-back of the point e^{-s} of I through branch (side, j). Returns u of the
  // preimage and its log|Df^R|.
  std::pair<double, double> inverse_branch(Side side, int j, double s) const;
  // f^{j+2}(c +- e^{-u}) as a plain value, with log|Df^{j+2}|.
  double induced(Side side, int j, double u, double& log_df) const;

  static constexpr double kLinearRegime = 50.0;

 private:
  std::shared_ptr<const FlatUnimodalMap> map_;
  NiceInterval interval_;
  double log_a_ = 0.0;
  mutable std::vector<double> boundary_s_;
  mutable std::vector<double> boundary_log_dg_;
  mutable int linear_start_ = -1;
};

struct BuildOptions {
  // Periodic points per branch (needed by the truncation model and freeze scans).
  bool periodic_points = true;
};

InducingScheme build_scheme(std::shared_ptr<const FlatUnimodalMap> map, const NiceInterval& interval,
                            int n_max, double tol, const BuildOptions& options = {});
InducingScheme build_scheme(const FlatUnimodalMap& map, const NiceInterval& interval, int n_max,
                            double tol, const BuildOptions& options = {});

// Independent enumeration by monotone-lap tracking in plain coordinates (shallow
// schemes only; used to cross-check the closed-form enumeration).
InducingScheme lap_tracker_scheme(const FlatUnimodalMap& map, const NiceInterval& interval,
                                  int n_max, double tol, std::size_t max_pending = 4096);

// nullopt means no return within `cap` iterates.
std::optional<long> return_time(const FlatUnimodalMap& map, const NiceInterval& interval,
                                ChartPoint x, long cap = 100'000'000);

double induced_log_derivative(const InducingScheme& scheme, const Branch& branch, ChartPoint x);

struct TailRow {
  int n = 0;
  int count = 0;           // #S(n)
  double log_tail = 0.0;   // log|{R > n}|
  double log_tail_sum = 0.0;  // log sum_{k=n}^{n_max} |{R > k}|
};

struct TailFitOptions {
  int n_lo = 0;                       // 0: max(2, n_max / 100)
  int n_hi = 0;                       // 0: n_max
  double stretched_exponent = 0.0;    // 0: 1/(alpha+1) for LogFlat, else 1/2
  int samples = 80;                   // log-spaced fit abscissae
};

struct TailTable {
  std::vector<TailRow> rows;  // n = 1..n_max
  LinearFit polynomial;       // log|{R>n}| against log n
  LinearFit stretched;        // log|{R>n}| against n^{stretched_exponent}
  double stretched_exponent = 0.5;
  int fit_lo = 0;
  int fit_hi = 0;
  double unresolved_mass = 0.0;
  double max_partition_residual = 0.0;
  double tail_ratio = kNaN;  // |{R>n_max}| / |{R>n_max-1}|
};

TailTable tail_statistics(const InducingScheme& scheme, const TailFitOptions& options = {});

// Scheme cache (JSON, reals as 17-significant-digit strings).
std::string scheme_to_json(const InducingScheme& scheme);
// Throws ValidationError when the file was built for a different map.
InducingScheme scheme_from_json(std::string_view text, std::shared_ptr<const FlatUnimodalMap> map);

}  // namespace flatcrit
