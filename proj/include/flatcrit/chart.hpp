#pragma once

#include <cstdint>
#include <string_view>

namespace flatcrit {

// Log-distances beyond this threshold are carried in a chart.
inline constexpr double kChartThreshold = 30.0;

enum class Side : std::uint8_t { Left, Right };

inline constexpr double sign_of(Side s) { return s == Side::Left ? -1.0 : 1.0; }
std::string_view side_name(Side s);
Side parse_side(std::string_view name);

enum class Chart : std::uint8_t { Plain, NearCPlus, NearCMinus, Near0, Near1 };

std::string_view chart_name(Chart chart);
Chart parse_chart(std::string_view name);

// A point of [0,1]. Plain stores x; NearC* store u = -log|x-c|, Near0 stores
// s = -log x and Near1 stores w = -log(1-x).
struct ChartPoint {
  Chart tag = Chart::Plain;
  double value = 0.0;

  static constexpr ChartPoint plain(double x) { return {Chart::Plain, x}; }
  static constexpr ChartPoint near_c(Side side, double u) {
    return {side == Side::Left ? Chart::NearCMinus : Chart::NearCPlus, u};
  }
  static constexpr ChartPoint near0(double s) { return {Chart::Near0, s}; }
  static constexpr ChartPoint near1(double w) { return {Chart::Near1, w}; }

  constexpr bool is_plain() const { return tag == Chart::Plain; }
  constexpr bool is_near_c() const { return tag == Chart::NearCPlus || tag == Chart::NearCMinus; }
  constexpr Side side() const { return tag == Chart::NearCMinus ? Side::Left : Side::Right; }

  friend constexpr bool operator==(const ChartPoint&, const ChartPoint&) = default;
};

}  // namespace flatcrit
