#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "flatcrit/chart.hpp"
#include "flatcrit/map_model.hpp"

namespace flatcrit {

// CobX is the coboundary f(x) - x of psi(x) = x.
enum class ObservableKind { One, X, X2, SqrtDistC, SqrtDist01, Sin2Pi, LogDf, PhiN, CobX };

// Test functions evaluated on chart points without leaving log coordinates.
struct Observable {
  ObservableKind kind = ObservableKind::X;
  int n = 0;  // PhiN cutoff index
  double shift = 0.0;  // evaluated value is phi(x) - shift

  std::string name() const;
  double operator()(const FlatUnimodalMap& map, ChartPoint x) const;
  bool bounded() const { return kind != ObservableKind::LogDf; }
  // Hoelder exponent of the shipped observables (0 for log|Df|, which is unbounded).
  double holder_exponent() const;
  // Value at 0 (Near0 points deep in the linear regime).
  double at_zero(const FlatUnimodalMap& map) const;
};

// Names: one, x, x2, sqrt_dist_c, sqrt_dist_01, sin2pi, log_df, phi_<n>, cob_x; a suffix
// "-<value>" subtracts a constant, e.g. "x-0.5".
Observable parse_observable(std::string_view name);
std::vector<Observable> parse_observables(const std::vector<std::string>& names);
// x, x2, sqrt_dist_c, sqrt_dist_01, sin2pi.
std::vector<Observable> holder_suite();

}  // namespace flatcrit
