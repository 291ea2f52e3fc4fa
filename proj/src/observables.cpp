#include "flatcrit/observables.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "flatcrit/error.hpp"
#include "flatcrit/numerics.hpp"

namespace flatcrit {

namespace {

double tent(double x, int n) {
  const double a = 1.0 / n;
  if (x <= a) return 1.0;
  if (x >= 2.0 * a) return 0.0;
  return 2.0 - x * n;
}

}  // namespace

std::string Observable::name() const {
  std::string base;
  switch (kind) {
    case ObservableKind::One: base = "one"; break;
    case ObservableKind::X: base = "x"; break;
    case ObservableKind::X2: base = "x2"; break;
    case ObservableKind::SqrtDistC: base = "sqrt_dist_c"; break;
    case ObservableKind::SqrtDist01: base = "sqrt_dist_01"; break;
    case ObservableKind::Sin2Pi: base = "sin2pi"; break;
    case ObservableKind::LogDf: base = "log_df"; break;
    case ObservableKind::PhiN: base = "phi_" + std::to_string(n); break;
    case ObservableKind::CobX: base = "cob_x"; break;
  }
  if (shift != 0.0) base += "-" + format_double(shift);
  return base;
}

double Observable::holder_exponent() const {
  switch (kind) {
    case ObservableKind::SqrtDistC:
    case ObservableKind::SqrtDist01: return 0.5;
    case ObservableKind::LogDf: return 0.0;
    default: return 1.0;
  }
}

double Observable::operator()(const FlatUnimodalMap& map, ChartPoint p) const {
  const double x = map.to_plain(p);
  double v = 0.0;
  switch (kind) {
    case ObservableKind::One: v = 1.0; break;
    case ObservableKind::X: v = x; break;
    case ObservableKind::X2: v = x * x; break;
    case ObservableKind::SqrtDistC:
      v = p.is_near_c() ? std::exp(-0.5 * p.value) : std::sqrt(map.distance_to_c(p));
      break;
    case ObservableKind::SqrtDist01:
      if (p.tag == Chart::Near0 || p.tag == Chart::Near1) {
        v = std::exp(-0.5 * p.value);
      } else {
        v = std::sqrt(std::min(x, 1.0 - x));
      }
      break;
    case ObservableKind::Sin2Pi:
      if (p.tag == Chart::Near1) {
        v = -std::sin(2.0 * std::numbers::pi * std::exp(-p.value));
      } else if (p.tag == Chart::Near0) {
        v = std::sin(2.0 * std::numbers::pi * std::exp(-p.value));
      } else {
        v = std::sin(2.0 * std::numbers::pi * x);
      }
      break;
    case ObservableKind::LogDf: v = map.log_derivative(p); break;
    case ObservableKind::PhiN: v = tent(x, n); break;
    case ObservableKind::CobX: v = map.to_plain(map.eval(p)) - x; break;
  }
  return v - shift;
}

double Observable::at_zero(const FlatUnimodalMap& map) const {
  return (*this)(map, ChartPoint::plain(0.0));
}

Observable parse_observable(std::string_view name) {
  Observable o;
  std::string_view base = name;
  const auto dash = name.find('-', 1);
  if (dash != std::string_view::npos) {
    base = name.substr(0, dash);
    const std::string_view num = name.substr(dash + 1);
    const auto res = std::from_chars(num.data(), num.data() + num.size(), o.shift);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
      throw Error(ErrorKind::ValidationError, "bad observable shift in '" + std::string(name) + "'");
    }
  }
  if (base == "one") {
    o.kind = ObservableKind::One;
  } else if (base == "x") {
    o.kind = ObservableKind::X;
  } else if (base == "x2") {
    o.kind = ObservableKind::X2;
  } else if (base == "sqrt_dist_c") {
    o.kind = ObservableKind::SqrtDistC;
  } else if (base == "sqrt_dist_01") {
    o.kind = ObservableKind::SqrtDist01;
  } else if (base == "sin2pi") {
    o.kind = ObservableKind::Sin2Pi;
  } else if (base == "log_df") {
    o.kind = ObservableKind::LogDf;
  } else if (base == "cob_x") {
    o.kind = ObservableKind::CobX;
  } else if (base.starts_with("phi_")) {
    o.kind = ObservableKind::PhiN;
    const std::string_view num = base.substr(4);
    const auto res = std::from_chars(num.data(), num.data() + num.size(), o.n);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size() || o.n < 1) {
      throw Error(ErrorKind::ValidationError, "bad tent index in '" + std::string(name) + "'");
    }
  } else {
    throw Error(ErrorKind::ValidationError, "unknown observable '" + std::string(name) + "'");
  }
  return o;
}

std::vector<Observable> parse_observables(const std::vector<std::string>& names) {
  std::vector<Observable> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(parse_observable(n));
  return out;
}

std::vector<Observable> holder_suite() {
  return parse_observables({"x", "x2", "sqrt_dist_c", "sqrt_dist_01", "sin2pi"});
}

}  // namespace flatcrit
