#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "flatcrit/chart.hpp"

namespace flatcrit {

enum class Family { Chebyshev, LogFlat, PowerFlat };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

struct MapSpec {
  Family family = Family::Chebyshev;
  double alpha = 1.0;
  double v0 = 0.4;
  double c = 0.5;
  double surgery_radius = 0.05;
  // |Df| at the fixed point 0 and at 1; 4 unless deliberately perturbed.
  double endpoint_slope = 4.0;

  friend bool operator==(const MapSpec&, const MapSpec&) = default;
};

// Canonical JSON text and its 64-bit FNV-1a fingerprint (hex).
std::string canonical_json(const MapSpec& spec);
std::string fingerprint(const MapSpec& spec);

// Outer branch piece P(y) = y (a + b y + c y^2) on [0, L], with y the distance
// to the fixed point 0 (left piece) or to 1 (right piece).
class OuterPiece {
 public:
  OuterPiece() = default;
  // Cubic Hermite data: P'(0) = slope0, P(L) = 1 - q_end, P'(L) = slope_end.
  static OuterPiece hermite(double slope0, double length, double q_end, double slope_end);
  // Exact polynomial y (a + b y); the deficit form is derived from it.
  static OuterPiece quadratic(double a, double b, double length);

  double length() const { return len_; }
  double value(double y) const { return y * ratio(y); }
  double ratio(double y) const { return a_ + y * (b_ + y * c_); }
  double derivative(double y) const { return a_ + y * (2.0 * b_ + 3.0 * c_ * y); }
  // 1 - P(L - eps), expanded about the join so that tiny deficits keep full precision.
  double deficit(double eps) const;
  double deficit_derivative(double eps) const;
  // y in [0, L] with P(y) = target.
  double solve(double target) const;
  // eps in [0, L] with deficit(eps) = target.
  double solve_deficit(double target) const;
  // One step in log coordinates: s -> -log P(e^{-s}), and its inverse.
  double log_step(double s) const;
  double log_step_inverse(double s) const;
  double log_derivative_log(double s) const { return std::log(derivative(std::exp(-s))); }
  double log_slope0() const { return log_a_; }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }

 private:
  double a_ = 0.0, b_ = 0.0, c_ = 0.0, len_ = 0.0;
  double q_ = 0.0, m_ = 0.0, d2_ = 0.0, d3_ = 0.0;
  double log_a_ = 0.0;
};

struct Flatness {
  double ell;
  double d_ell;
};

struct PeriodicPoint {
  double x;
  int period;
  double log_multiplier;
};

struct MisiurewiczReport {
  double postcritical_min_distance = 0.0;
  double m1_threshold = 1e-6;
  bool m1_pass = false;
  std::vector<PeriodicPoint> periodic_points;
  double min_log_multiplier = 0.0;
  double m2_threshold = 0.0;
  bool m2_pass = false;
  bool pass() const { return m1_pass && m2_pass; }
};

class FlatUnimodalMap {
 public:
  explicit FlatUnimodalMap(const MapSpec& spec);

  const MapSpec& spec() const { return spec_; }
  const std::string& fingerprint() const { return fingerprint_; }
  double c() const { return c_; }
  // Effective half-width of the top window (the surgery radius; 1/4 for Chebyshev).
  double window() const { return s0_; }
  double window_log_distance() const { return u_b_; }
  double log_df0() const { return left_.log_slope0(); }
  double log_df1() const { return right_.log_slope0(); }
  const OuterPiece& left_piece() const { return left_; }
  const OuterPiece& right_piece() const { return right_; }
  bool is_flat() const { return spec_.family != Family::Chebyshev; }

  ChartPoint eval(ChartPoint x) const;
  double log_derivative(ChartPoint x) const;
  Flatness flatness(ChartPoint x) const;

  // Plain value of f and a full-precision 1 - f.
  double value(double x) const;
  double deficit(double x) const;

  // Chart bookkeeping.
  double to_plain(ChartPoint x) const;
  double offset_from_c(ChartPoint x) const;
  double distance_to_c(ChartPoint x) const { return std::abs(offset_from_c(x)); }
  ChartPoint normalize(ChartPoint x) const;
  ChartPoint from_plain(double x) const;

  // Top-window profile in log coordinates, u > window_log_distance():
  // 1 - f(c +- e^{-u}) = e^{-W(u)}.
  double top_w(double u) const;
  double top_log_dw(double u) const;
  double top_u(double w) const;

  // Same quantities on either side for any admissible u (window or outer piece).
  double w_of(Side side, double u) const;
  double u_of(Side side, double w) const;
  double log_df_at(Side side, double u) const;

  // f near 1 in log coordinates: w = -log(1-x) -> s = -log f(x), and its inverse.
  double near1_step(double w) const { return right_.log_step(w); }
  double near1_step_inverse(double s) const { return right_.log_step_inverse(s); }
  double log_df_near1(double w) const { return right_.log_derivative_log(w); }
  // Left branch g = f|[0,c] near 0 in log coordinates.
  double g_step(double s) const { return left_.log_step(s); }
  double g_step_inverse(double s) const { return left_.log_step_inverse(s); }
  double log_dg(double s) const { return left_.log_derivative_log(s); }

 private:
  ChartPoint classify(double y, double one_minus_y) const;
  ChartPoint from_w(double w) const;
  ChartPoint from_s(double s) const;
  void check_monotone() const;

  MapSpec spec_;
  std::string fingerprint_;
  double c_ = 0.5;
  double s0_ = 0.25;
  double u_b_ = 0.0;
  double w_b_ = 0.0;
  OuterPiece left_;
  OuterPiece right_;
};

FlatUnimodalMap make_map(const MapSpec& spec);

MisiurewiczReport misiurewicz_report(const FlatUnimodalMap& map, int depth, int period_bound);

}  // namespace flatcrit
