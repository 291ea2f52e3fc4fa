#include "flatcrit/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "flatcrit/error.hpp"
#include "flatcrit/numerics.hpp"
#include "json.hpp"

namespace flatcrit {

namespace {

constexpr double kLog4 = 1.3862943611198906;

double newton_monotone(const std::function<double(double)>& f,
                       const std::function<double(double)>& df, double lo, double hi,
                       double guess, double target) {
  double y = std::clamp(guess, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double r = f(y) - target;
    if (r == 0.0) return y;
    if (r > 0.0) {
      hi = y;
    } else {
      lo = y;
    }
    const double d = df(y);
    double next = d > 0.0 ? y - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(y) ||
        hi - lo <= std::numeric_limits<double>::denorm_min()) {
      return next;
    }
    y = next;
  }
  return y;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Chebyshev: return "chebyshev";
    case Family::LogFlat: return "log_flat";
    case Family::PowerFlat: return "power_flat";
  }
  return "chebyshev";
}

Family parse_family(std::string_view name) {
  if (name == "chebyshev") return Family::Chebyshev;
  if (name == "log_flat") return Family::LogFlat;
  if (name == "power_flat") return Family::PowerFlat;
  throw Error(ErrorKind::InvalidSpec, "unknown family '" + std::string(name) + "'");
}

std::string canonical_json(const MapSpec& spec) {
  nlohmann::json j;
  j["family"] = family_name(spec.family);
  j["alpha"] = spec.alpha;
  j["v0"] = spec.v0;
  j["c"] = spec.c;
  j["surgery_radius"] = spec.surgery_radius;
  if (spec.endpoint_slope != 4.0) j["endpoint_slope"] = spec.endpoint_slope;
  return j.dump();
}

std::string fingerprint(const MapSpec& spec) { return hex64(fnv1a64(canonical_json(spec))); }

// ---------------------------------------------------------------------------
// OuterPiece

OuterPiece OuterPiece::hermite(double slope0, double length, double q_end, double slope_end) {
  OuterPiece p;
  const double L = length;
  const double r1 = (1.0 - q_end) - slope0 * L;
  const double r2 = slope_end - slope0;
  p.a_ = slope0;
  p.c_ = (r2 * L - 2.0 * r1) / (L * L * L);
  p.b_ = (r1 - p.c_ * L * L * L) / (L * L);
  p.len_ = L;
  p.q_ = q_end;
  p.m_ = slope_end;
  p.d2_ = p.b_ + 3.0 * p.c_ * L;
  p.d3_ = p.c_;
  p.log_a_ = std::log(slope0);
  return p;
}

OuterPiece OuterPiece::quadratic(double a, double b, double length) {
  OuterPiece p;
  p.a_ = a;
  p.b_ = b;
  p.c_ = 0.0;
  p.len_ = length;
  p.q_ = 1.0 - p.value(length);
  p.m_ = p.derivative(length);
  p.d2_ = b;
  p.d3_ = 0.0;
  p.log_a_ = std::log(a);
  return p;
}

double OuterPiece::deficit(double eps) const { return q_ + eps * (m_ + eps * (-d2_ + eps * d3_)); }

double OuterPiece::deficit_derivative(double eps) const {
  return m_ + eps * (-2.0 * d2_ + 3.0 * d3_ * eps);
}

double OuterPiece::solve(double target) const {
  if (target <= 0.0) return 0.0;
  if (target >= value(len_)) return len_;
  return newton_monotone([this](double y) { return value(y); },
                         [this](double y) { return derivative(y); }, 0.0, len_, target / a_,
                         target);
}

double OuterPiece::solve_deficit(double target) const {
  if (target <= q_) return 0.0;
  if (target >= deficit(len_)) return len_;
  const double guess = m_ > 0.0 ? (target - q_) / m_ : 0.5 * len_;
  return newton_monotone([this](double e) { return deficit(e); },
                         [this](double e) { return deficit_derivative(e); }, 0.0, len_, guess,
                         target);
}

double OuterPiece::log_step(double s) const { return s - std::log(ratio(std::exp(-s))); }

double OuterPiece::log_step_inverse(double s) const {
  if (s > 40.0) {
    double r = s + log_a_;
    for (int i = 0; i < 4; ++i) r = s + std::log(ratio(std::exp(-r)));
    return r;
  }
  return -std::log(solve(std::exp(-s)));
}

// ---------------------------------------------------------------------------
// FlatUnimodalMap

FlatUnimodalMap::FlatUnimodalMap(const MapSpec& spec_in) : spec_(spec_in) {
  if (!(spec_.endpoint_slope > 0.0) || !std::isfinite(spec_.endpoint_slope)) {
    throw Error(ErrorKind::InvalidSpec, "endpoint_slope must be positive");
  }
  if (spec_.family == Family::Chebyshev) {
    spec_ = MapSpec{};
    c_ = 0.5;
    s0_ = 0.25;
    u_b_ = -std::log(s0_);
    w_b_ = top_w(u_b_);
    left_ = OuterPiece::quadratic(4.0, -4.0, 0.25);
    right_ = OuterPiece::quadratic(4.0, -4.0, 0.25);
    fingerprint_ = flatcrit::fingerprint(spec_);
    return;
  }
  if (!(spec_.c > 0.0 && spec_.c < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "c must lie in (0,1)");
  }
  if (spec_.family == Family::LogFlat && !(spec_.alpha > 0.0 && std::isfinite(spec_.alpha))) {
    throw Error(ErrorKind::InvalidSpec, "alpha must be positive");
  }
  if (spec_.family == Family::PowerFlat && !(spec_.v0 > 0.0 && spec_.v0 < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "v0 must lie in (0,1)");
  }
  const double s0 = spec_.surgery_radius;
  if (!(s0 > 0.0 && s0 < std::min(spec_.c, 1.0 - spec_.c))) {
    throw Error(ErrorKind::InvalidSpec, "surgery_radius must lie in (0, min(c, 1-c))");
  }
  c_ = spec_.c;
  s0_ = s0;
  u_b_ = -std::log(s0_);
  w_b_ = top_w(u_b_);
  const double q = std::exp(-w_b_);
  const double m = std::exp(log_df_at(Side::Right, std::nextafter(u_b_, kInf)));
  left_ = OuterPiece::hermite(spec_.endpoint_slope, c_ - s0_, q, m);
  right_ = OuterPiece::hermite(spec_.endpoint_slope, 1.0 - c_ - s0_, q, m);
  fingerprint_ = flatcrit::fingerprint(spec_);
  check_monotone();
}

FlatUnimodalMap make_map(const MapSpec& spec) { return FlatUnimodalMap(spec); }

double FlatUnimodalMap::top_w(double u) const {
  switch (spec_.family) {
    case Family::Chebyshev: return 2.0 * u - kLog4;
    case Family::LogFlat: return std::pow(u, spec_.alpha + 1.0);
    case Family::PowerFlat: return u * std::exp(spec_.v0 * u);
  }
  return kNaN;
}

double FlatUnimodalMap::top_log_dw(double u) const {
  switch (spec_.family) {
    case Family::Chebyshev: return std::log(2.0);
    case Family::LogFlat: return std::log(spec_.alpha + 1.0) + spec_.alpha * std::log(u);
    case Family::PowerFlat: return spec_.v0 * u + std::log1p(spec_.v0 * u);
  }
  return kNaN;
}

double FlatUnimodalMap::top_u(double w) const {
  switch (spec_.family) {
    case Family::Chebyshev: return 0.5 * (w + kLog4);
    case Family::LogFlat: return std::pow(w, 1.0 / (spec_.alpha + 1.0));
    case Family::PowerFlat: {
      // z = log u solves z + v0 e^z = log w; the left side is convex and increasing.
      const double v0 = spec_.v0;
      const double lw = std::log(w);
      double z = lw > 1.0 ? std::log(std::max(lw - std::log(lw / v0), 1e-3) / v0) : lw;
      for (int i = 0; i < 100; ++i) {
        const double ez = std::exp(z);
        const double step = (z + v0 * ez - lw) / (1.0 + v0 * ez);
        z -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
      }
      return std::exp(z);
    }
  }
  return kNaN;
}

double FlatUnimodalMap::w_of(Side side, double u) const {
  if (u > u_b_) return top_w(u);
  const OuterPiece& piece = side == Side::Left ? left_ : right_;
  const double eps = std::clamp(std::exp(-u) - s0_, 0.0, piece.length());
  return -std::log(piece.deficit(eps));
}

double FlatUnimodalMap::u_of(Side side, double w) const {
  if (w >= w_b_) return std::max(top_u(w), std::nextafter(u_b_, kInf));
  const OuterPiece& piece = side == Side::Left ? left_ : right_;
  const double eps = piece.solve_deficit(std::exp(-w));
  return -std::log(s0_ + eps);
}

double FlatUnimodalMap::log_df_at(Side side, double u) const {
  if (u > u_b_) return -top_w(u) + u + top_log_dw(u);
  const OuterPiece& piece = side == Side::Left ? left_ : right_;
  const double eps = std::clamp(std::exp(-u) - s0_, 0.0, piece.length());
  return std::log(piece.derivative(piece.length() - eps));
}

double FlatUnimodalMap::value(double x) const {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  if (x == c_) return 1.0;
  if (x < c_ - s0_) return left_.value(x);
  if (x > c_ + s0_) return right_.value(1.0 - x);
  return -std::expm1(-top_w(-std::log(std::abs(x - c_))));
}

double FlatUnimodalMap::deficit(double x) const {
  if (x <= 0.0 || x >= 1.0) return 1.0;
  if (x == c_) return 0.0;
  if (x < c_ - s0_) {
    const double eps = left_.length() - x;
    return eps < 0.5 * left_.length() ? left_.deficit(eps) : 1.0 - left_.value(x);
  }
  if (x > c_ + s0_) {
    const double eps = x - (c_ + s0_);
    return eps < 0.5 * right_.length() ? right_.deficit(eps) : 1.0 - right_.value(1.0 - x);
  }
  return std::exp(-top_w(-std::log(std::abs(x - c_))));
}

ChartPoint FlatUnimodalMap::classify(double y, double one_minus_y) const {
  if (y <= 0.0) return ChartPoint::plain(0.0);
  if (one_minus_y <= 0.0) return ChartPoint::plain(1.0);
  static const double band = std::exp(-kChartThreshold);
  if (y < band) return ChartPoint::near0(-std::log(y));
  if (one_minus_y < band) return ChartPoint::near1(-std::log(one_minus_y));
  const double d = y - c_;
  if (d != 0.0 && std::abs(d) < band) {
    return ChartPoint::near_c(d < 0.0 ? Side::Left : Side::Right, -std::log(std::abs(d)));
  }
  return ChartPoint::plain(one_minus_y < 0.5 ? 1.0 - one_minus_y : y);
}

ChartPoint FlatUnimodalMap::from_w(double w) const {
  if (w > kChartThreshold) return ChartPoint::near1(w);
  return classify(-std::expm1(-w), std::exp(-w));
}

ChartPoint FlatUnimodalMap::from_s(double s) const {
  if (s > kChartThreshold) return ChartPoint::near0(s);
  return classify(std::exp(-s), -std::expm1(-s));
}

ChartPoint FlatUnimodalMap::from_plain(double x) const { return classify(x, 1.0 - x); }

ChartPoint FlatUnimodalMap::eval(ChartPoint p) const {
  switch (p.tag) {
    case Chart::Plain: {
      const double x = p.value;
      if (x <= 0.0 || x >= 1.0) return ChartPoint::plain(0.0);
      if (x == c_) return ChartPoint::plain(1.0);
      if (x < c_ - s0_) return classify(left_.value(x), deficit(x));
      if (x > c_ + s0_) return classify(right_.value(1.0 - x), deficit(x));
      return from_w(top_w(-std::log(std::abs(x - c_))));
    }
    case Chart::NearCPlus:
    case Chart::NearCMinus: return from_w(w_of(p.side(), p.value));
    case Chart::Near1: return from_s(near1_step(p.value));
    case Chart::Near0: return from_s(g_step(p.value));
  }
  return p;
}

double FlatUnimodalMap::log_derivative(ChartPoint p) const {
  switch (p.tag) {
    case Chart::Plain: {
      const double x = p.value;
      if (x == c_) throw Error(ErrorKind::CriticalPoint, "Df vanishes at the critical point");
      if (x <= 0.0) return left_.log_slope0();
      if (x >= 1.0) return right_.log_slope0();
      if (x < c_ - s0_) return std::log(left_.derivative(x));
      if (x > c_ + s0_) return std::log(right_.derivative(1.0 - x));
      return log_df_at(x < c_ ? Side::Left : Side::Right, -std::log(std::abs(x - c_)));
    }
    case Chart::NearCPlus:
    case Chart::NearCMinus: return log_df_at(p.side(), p.value);
    case Chart::Near1: return log_df_near1(p.value);
    case Chart::Near0: return log_dg(p.value);
  }
  return kNaN;
}

Flatness FlatUnimodalMap::flatness(ChartPoint p) const {
  if (!is_flat()) throw Error(ErrorKind::NotFlat, "Chebyshev map has a quadratic critical point");
  double u = 0.0;
  double sigma = 1.0;
  if (p.is_plain()) {
    if (p.value == c_) throw Error(ErrorKind::CriticalPoint, "flatness profile is infinite at c");
    u = -std::log(std::abs(p.value - c_));
    sigma = p.value < c_ ? -1.0 : 1.0;
  } else if (p.is_near_c()) {
    u = p.value;
    sigma = sign_of(p.side());
  } else {
    throw Error(ErrorKind::OutsideWindow, "point is not near the critical point");
  }
  if (u <= u_b_) throw Error(ErrorKind::OutsideWindow, "|x-c| >= surgery radius");
  if (spec_.family == Family::LogFlat) {
    const double a = spec_.alpha;
    return {std::pow(u, a), -sigma * a * std::pow(u, a - 1.0) * std::exp(u)};
  }
  const double v0 = spec_.v0;
  return {std::exp(v0 * u), -sigma * v0 * std::exp((v0 + 1.0) * u)};
}

double FlatUnimodalMap::to_plain(ChartPoint p) const {
  switch (p.tag) {
    case Chart::Plain: return p.value;
    case Chart::NearCPlus: return c_ + std::exp(-p.value);
    case Chart::NearCMinus: return c_ - std::exp(-p.value);
    case Chart::Near0: return std::exp(-p.value);
    case Chart::Near1: return -std::expm1(-p.value);
  }
  return kNaN;
}

double FlatUnimodalMap::offset_from_c(ChartPoint p) const {
  switch (p.tag) {
    case Chart::Plain: return p.value - c_;
    case Chart::NearCPlus: return std::exp(-p.value);
    case Chart::NearCMinus: return -std::exp(-p.value);
    case Chart::Near0: return std::exp(-p.value) - c_;
    case Chart::Near1: return (1.0 - c_) - std::exp(-p.value);
  }
  return kNaN;
}

ChartPoint FlatUnimodalMap::normalize(ChartPoint p) const {
  switch (p.tag) {
    case Chart::Plain: return from_plain(p.value);
    case Chart::NearCPlus:
    case Chart::NearCMinus:
      if (p.value > kChartThreshold) return p;
      return ChartPoint::plain(to_plain(p));
    case Chart::Near0: return from_s(p.value);
    case Chart::Near1: return from_w(p.value);
  }
  return p;
}

void FlatUnimodalMap::check_monotone() const {
  // w = -log(1 - f) is a strictly increasing function of f.
  auto w_plain = [this](double x) {
    if (std::abs(x - c_) < s0_) return top_w(-std::log(std::abs(x - c_)));
    const double y = value(x);
    return y < 0.5 ? -std::log1p(-y) : -std::log(deficit(x));
  };
  constexpr int kGrid = 10000;
  double prev = w_plain(0.0);
  for (int i = 1; i < kGrid; ++i) {
    const double x = c_ * static_cast<double>(i) / kGrid;
    const double w = w_plain(x);
    const double d = log_derivative(ChartPoint::plain(x));
    if (!(w > prev) || !std::isfinite(d)) {
      throw Error(ErrorKind::NonMonotoneSurgery,
                  "left branch not strictly increasing near x=" + format_double(x));
    }
    prev = w;
  }
  prev = kInf;
  for (int i = 1; i <= kGrid; ++i) {
    const double x = c_ + (1.0 - c_) * static_cast<double>(i) / kGrid;
    const double w = w_plain(x);
    if (!(w < prev)) {
      throw Error(ErrorKind::NonMonotoneSurgery,
                  "right branch not strictly decreasing near x=" + format_double(x));
    }
    if (i < kGrid && !std::isfinite(log_derivative(ChartPoint::plain(x)))) {
      throw Error(ErrorKind::NonMonotoneSurgery,
                  "right branch has a vanishing derivative near x=" + format_double(x));
    }
    prev = w;
  }
  for (const OuterPiece* piece : {&left_, &right_}) {
    for (int i = 0; i <= kGrid; ++i) {
      const double y = piece->length() * static_cast<double>(i) / kGrid;
      if (!(piece->derivative(y) > 0.0)) {
        throw Error(ErrorKind::NonMonotoneSurgery, "outer interpolant has a non-positive slope");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Misiurewicz diagnostics

namespace {

ChartPoint iterate(const FlatUnimodalMap& map, double x, int k) {
  ChartPoint p = map.from_plain(x);
  for (int i = 0; i < k; ++i) p = map.eval(p);
  return p;
}

std::vector<std::pair<double, double>> laps_of_iterate(const FlatUnimodalMap& map, int p) {
  const double c = map.c();
  std::vector<std::pair<double, double>> laps{{0.0, c}, {c, 1.0}};
  for (int k = 1; k < p; ++k) {
    std::vector<std::pair<double, double>> next;
    next.reserve(laps.size() * 2);
    for (const auto& [a, b] : laps) {
      const double oa = map.offset_from_c(iterate(map, a, k));
      const double ob = map.offset_from_c(iterate(map, b, k));
      if ((oa < 0.0 && ob > 0.0) || (oa > 0.0 && ob < 0.0)) {
        const double xm =
            bisect([&](double x) { return map.offset_from_c(iterate(map, x, k)) * (oa < 0 ? 1 : -1); },
                   a, b, 1e-15);
        next.emplace_back(a, xm);
        next.emplace_back(xm, b);
      } else {
        next.emplace_back(a, b);
      }
    }
    laps = std::move(next);
  }
  return laps;
}

}  // namespace

MisiurewiczReport misiurewicz_report(const FlatUnimodalMap& map, int depth, int period_bound) {
  if (depth < 1 || period_bound < 1) {
    throw Error(ErrorKind::InvalidSpec, "depth and period_bound must be >= 1");
  }
  if (period_bound > 16) {
    throw Error(ErrorKind::BudgetExceeded, "period_bound above 16 needs more than 2^16 laps");
  }
  MisiurewiczReport rep;
  ChartPoint orbit = ChartPoint::plain(map.c());
  rep.postcritical_min_distance = kInf;
  for (int n = 1; n <= depth; ++n) {
    orbit = map.eval(orbit);
    rep.postcritical_min_distance = std::min(rep.postcritical_min_distance, map.distance_to_c(orbit));
  }
  rep.m1_pass = rep.postcritical_min_distance > rep.m1_threshold;

  rep.min_log_multiplier = kInf;
  for (int p = 1; p <= period_bound; ++p) {
    for (const auto& [a, b] : laps_of_iterate(map, p)) {
      auto g = [&](double x) { return map.to_plain(iterate(map, x, p)) - x; };
      const double ga = g(a), gb = g(b);
      double root = kNaN;
      if (ga == 0.0) {
        root = a;
      } else if (gb == 0.0) {
        root = b;
      } else if ((ga < 0.0) != (gb < 0.0)) {
        root = bisect(g, a, b, 1e-15);
      } else {
        continue;
      }
      const bool seen = std::any_of(rep.periodic_points.begin(), rep.periodic_points.end(),
                                    [&](const PeriodicPoint& q) { return std::abs(q.x - root) < 1e-9; });
      if (seen) continue;
      double mult = 0.0;
      ChartPoint q = map.from_plain(root);
      bool critical = false;
      for (int k = 0; k < p; ++k) {
        if (q.is_plain() && q.value == map.c()) {
          critical = true;
          break;
        }
        mult += map.log_derivative(q);
        q = map.eval(q);
      }
      if (critical) continue;
      rep.periodic_points.push_back({root, p, mult});
      rep.min_log_multiplier = std::min(rep.min_log_multiplier, mult);
    }
  }
  rep.m2_pass = rep.min_log_multiplier > rep.m2_threshold;
  return rep;
}

}  // namespace flatcrit
