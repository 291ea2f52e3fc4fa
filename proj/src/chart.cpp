#include "flatcrit/chart.hpp"

#include <string>

#include "flatcrit/error.hpp"

namespace flatcrit {

std::string_view side_name(Side s) { return s == Side::Left ? "left" : "right"; }

Side parse_side(std::string_view name) {
  if (name == "left") return Side::Left;
  if (name == "right") return Side::Right;
  throw Error(ErrorKind::ParseError, "unknown side '" + std::string(name) + "'");
}

std::string_view chart_name(Chart chart) {
  switch (chart) {
    case Chart::Plain: return "plain";
    case Chart::NearCPlus: return "near_c_plus";
    case Chart::NearCMinus: return "near_c_minus";
    case Chart::Near0: return "near_0";
    case Chart::Near1: return "near_1";
  }
  return "plain";
}

Chart parse_chart(std::string_view name) {
  if (name == "plain") return Chart::Plain;
  if (name == "near_c_plus") return Chart::NearCPlus;
  if (name == "near_c_minus") return Chart::NearCMinus;
  if (name == "near_0") return Chart::Near0;
  if (name == "near_1") return Chart::Near1;
  throw Error(ErrorKind::ParseError, "unknown chart '" + std::string(name) + "'");
}

}  // namespace flatcrit
