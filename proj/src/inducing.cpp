#include "flatcrit/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "flatcrit/error.hpp"

namespace flatcrit {

namespace {

bool is_cycle(const std::vector<double>& seen, double x) {
  return std::any_of(seen.begin(), seen.end(), [x](double y) { return std::abs(x - y) < 1e-12; });
}

// log|Df^n(x)| and f^n(x), iterating through charts. Steps spent deep inside the
// linear regime near 0 are taken in one jump.
ChartPoint iterate_log_df(const FlatUnimodalMap& map, ChartPoint x, long n, double& log_df) {
  const double la = map.log_df0();
  while (n > 0) {
    if (x.tag == Chart::Near0 && x.value >= Excursion::kLinearRegime + la) {
      const long m = std::min<long>(n, static_cast<long>((x.value - Excursion::kLinearRegime) / la));
      if (m > 0) {
        log_df += static_cast<double>(m) * la;
        x.value -= static_cast<double>(m) * la;
        n -= m;
        continue;
      }
    }
    log_df += map.log_derivative(x);
    x = map.eval(x);
    --n;
  }
  return x;
}

// Root of a monotone-crossing function on [a, b]; a root sitting on an endpoint
// (where rounding may spoil the sign) is returned as that endpoint.
double root_or_endpoint(const std::function<double(double)>& h, double a, double b) {
  const double ha = h(a), hb = h(b);
  if ((ha < 0.0) != (hb < 0.0) && ha != 0.0 && hb != 0.0) return bisect(h, a, b, 0.0);
  return std::abs(ha) <= std::abs(hb) ? a : b;
}

double chart_log_distance(const FlatUnimodalMap& map, ChartPoint x) {
  if (x.is_near_c()) return x.value;
  return -std::log(std::abs(map.offset_from_c(x)));
}

}  // namespace

// ---------------------------------------------------------------------------

NiceInterval nice_interval(const FlatUnimodalMap& map) {
  const double c = map.c();
  double a_plus = 0.0;
  try {
    a_plus = bisect([&](double x) { return map.value(x) - x; }, std::nextafter(c, 1.0),
                    std::nextafter(1.0, 0.0), 0.0);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NoSignChange) {
      throw Error(ErrorKind::NoFixedPoint, "no fixed point of f in (c, 1)");
    }
    throw;
  }
  const double a_minus = bisect([&](double x) { return map.value(x) - a_plus; }, 0.0, c, 0.0);

  if (!(map.log_derivative(ChartPoint::plain(a_plus)) > 0.0)) {
    throw Error(ErrorKind::NotNice, "fixed point a+ = " + format_double(a_plus) + " is not repelling");
  }
  if (!(map.log_df0() > 0.0)) {
    throw Error(ErrorKind::NotNice, "fixed point 0 is not repelling");
  }

  NiceInterval I{a_minus, a_plus, 0.0, 0.0};
  const double margin = 1e-12 * I.length();
  for (double start : {a_minus, a_plus}) {
    std::vector<double> seen;
    ChartPoint p = map.from_plain(start);
    for (int n = 1; n <= 1000; ++n) {
      p = map.eval(p);
      const double x = map.to_plain(p);
      if (x > a_minus + margin && x < a_plus - margin) {
        throw Error(ErrorKind::NotNice, "orbit of the boundary re-enters I at iterate " + std::to_string(n));
      }
      if (is_cycle(seen, x)) break;
      seen.push_back(x);
    }
  }

  // Largest tau for which the concentric interval of relative margin tau avoids the
  // postcritical orbit (and stays inside [0, 1]).
  double gap_left = a_minus;
  double gap_right = 1.0 - a_plus;
  std::vector<double> seen;
  ChartPoint p = ChartPoint::plain(c);
  for (int n = 1; n <= 1000; ++n) {
    p = map.eval(p);
    const double x = map.to_plain(p);
    if (I.contains(x)) throw Error(ErrorKind::NotNice, "postcritical orbit enters I");
    if (x <= a_minus) gap_left = std::min(gap_left, a_minus - x);
    if (x >= a_plus) gap_right = std::min(gap_right, x - a_plus);
    if (is_cycle(seen, x)) break;
    seen.push_back(x);
  }
  I.tau = std::min(gap_left, gap_right) / I.length();
  if (!(I.tau > 0.0)) throw Error(ErrorKind::NotNice, "no Koebe space around I");
  I.K_tau = (1.0 + I.tau) * (1.0 + I.tau) / I.tau;
  return I;
}

// ---------------------------------------------------------------------------

double Branch::u_mid() const {
  const double uf = u_far();
  const double un = u_near();
  return uf + std::log(2.0) - std::log1p(std::exp(uf - un));
}

int InducingScheme::find(Side side, int R) const {
  const int per_side = n_max - 1;
  if (static_cast<int>(branches.size()) == 2 * per_side && R >= 2 && R <= n_max) {
    const int idx = side == Side::Left ? R - 2 : per_side + (n_max - R);
    if (branches[idx].R == R && branches[idx].side == side) return idx;
  }
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (branches[i].R == R && branches[i].side == side) return static_cast<int>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------

Excursion::Excursion(std::shared_ptr<const FlatUnimodalMap> map, const NiceInterval& interval)
    : map_(std::move(map)), interval_(interval) {
  const FlatUnimodalMap& f = *map_;
  const double slack = 1e-15;
  if (interval_.a_minus > f.c() - f.window() + slack || interval_.a_plus < f.c() + f.window() - slack) {
    throw Error(ErrorKind::InvalidSpec, "closed-form excursions need I to contain the flat window");
  }
  log_a_ = f.log_df0();
  boundary_s_.push_back(-std::log(interval_.a_minus));
  boundary_log_dg_.push_back(f.log_dg(boundary_s_.back()));
}

double Excursion::pull_back(double s, int k, double& log_dg_sum) const {
  const FlatUnimodalMap& f = *map_;
  while (k > 0 && s < kLinearRegime) {
    s = f.g_step_inverse(s);
    log_dg_sum += f.log_dg(s);
    --k;
  }
  if (k > 0) {
    s += static_cast<double>(k) * log_a_;
    log_dg_sum += static_cast<double>(k) * log_a_;
  }
  return s;
}

double Excursion::push_forward(double s, int k, double& log_dg_sum) const {
  const FlatUnimodalMap& f = *map_;
  while (k > 0) {
    if (s >= kLinearRegime + log_a_) {
      const int m = std::min(k, static_cast<int>((s - kLinearRegime) / log_a_));
      s -= static_cast<double>(m) * log_a_;
      log_dg_sum += static_cast<double>(m) * log_a_;
      k -= m;
      continue;
    }
    log_dg_sum += f.log_dg(s);
    s = f.g_step(s);
    --k;
  }
  return s;
}

double Excursion::enter(Side side, double u, double& log_df2) const {
  const FlatUnimodalMap& f = *map_;
  const double w = f.w_of(side, u);
  log_df2 += f.log_df_at(side, u) + f.log_df_near1(w);
  return f.near1_step(w);
}

double Excursion::leave(Side side, double s, double& log_df2) const {
  const FlatUnimodalMap& f = *map_;
  const double w = f.near1_step_inverse(s);
  const double u = f.u_of(side, w);
  log_df2 += f.log_df_at(side, u) + f.log_df_near1(w);
  return u;
}

void Excursion::extend_boundary(int j_max) const {
  // Inside the linear regime the chain is an arithmetic progression; it is evaluated
  // by multiplication so that it agrees with the jumps of push_forward to rounding.
  while (static_cast<int>(boundary_s_.size()) <= j_max) {
    const int j = static_cast<int>(boundary_s_.size());
    double s = 0.0;
    if (linear_start_ < 0 && boundary_s_.back() >= kLinearRegime) linear_start_ = j - 1;
    if (linear_start_ >= 0) {
      s = boundary_s_[linear_start_] + static_cast<double>(j - linear_start_) * log_a_;
    } else {
      double dummy = 0.0;
      s = pull_back(boundary_s_.back(), 1, dummy);
    }
    boundary_s_.push_back(s);
    boundary_log_dg_.push_back(map_->log_dg(s));
  }
}

double Excursion::boundary_s(int j) const {
  if (j < 0) return -std::log(interval_.a_plus);
  extend_boundary(j);
  return boundary_s_[j];
}

double Excursion::boundary_log_dg(int j) const {
  extend_boundary(j);
  return boundary_log_dg_[j];
}

std::pair<double, double> Excursion::inverse_branch(Side side, int j, double s) const {
  double log_df = 0.0;
  const double s2 = pull_back(s, j, log_df);
  const double u = leave(side, s2, log_df);
  return {u, log_df};
}

double Excursion::induced(Side side, int j, double u, double& log_df) const {
  const double s = enter(side, u, log_df);
  return std::exp(-push_forward(s, j, log_df));
}

// ---------------------------------------------------------------------------

namespace {

ChartPoint point_at(const FlatUnimodalMap& map, Side side, double u) {
  return map.normalize(ChartPoint::near_c(side, u));
}

Branch make_chart_branch(const FlatUnimodalMap& map, Side side, int j, double u_far, double u_near,
                         double ldf_far, double ldf_near) {
  Branch b;
  b.R = j + 2;
  b.side = side;
  b.log_measure = -u_far + std::log(-std::expm1(u_far - u_near));
  if (side == Side::Right) {
    b.lo = point_at(map, side, u_near);
    b.hi = point_at(map, side, u_far);
    b.u_lo = u_near;
    b.u_hi = u_far;
    b.log_df_lo = ldf_near;
    b.log_df_hi = ldf_far;
  } else {
    b.lo = point_at(map, side, u_far);
    b.hi = point_at(map, side, u_near);
    b.u_lo = u_far;
    b.u_hi = u_near;
    b.log_df_lo = ldf_far;
    b.log_df_hi = ldf_near;
  }
  return b;
}

}  // namespace

InducingScheme build_scheme(std::shared_ptr<const FlatUnimodalMap> map_ptr, const NiceInterval& I,
                            int n_max, double tol, const BuildOptions& options) {
  if (n_max < 2) throw Error(ErrorKind::InvalidSpec, "n_max must be >= 2");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidSpec, "tol must be positive");
  if (n_max > 50'000'000) throw Error(ErrorKind::BudgetExceeded, "n_max above 5e7 branches per side");
  const FlatUnimodalMap& map = *map_ptr;
  const Excursion ex(map_ptr, I);
  const int J = n_max - 2;
  ex.extend_boundary(J);

  InducingScheme scheme;
  scheme.map = map_ptr;
  scheme.interval = I;
  scheme.n_max = n_max;
  scheme.tol = tol;
  scheme.map_fingerprint = map.fingerprint();

  const double s_a_minus = ex.boundary_s(0);
  const double s_a_plus = ex.boundary_s(-1);
  const double w_a_plus = -std::log1p(-I.a_plus);

  std::vector<Branch> per_side[2];
  std::vector<double> u_near_side[2];
  for (Side side : {Side::Left, Side::Right}) {
    const int si = side == Side::Left ? 0 : 1;
    std::vector<Branch>& out = per_side[si];
    out.reserve(J + 1);
    u_near_side[si].reserve(J + 1);
    const double a_side = side == Side::Left ? I.a_minus : I.a_plus;
    double u_far = -std::log(std::abs(a_side - map.c()));
    double ldf_far = 0.0;
    (void)ex.enter(side, u_far, ldf_far);
    double near_chain = 0.0;  // sum_{i=1}^{j} log g'(b_i)
    double far_chain = 0.0;   // sum_{i=0}^{j-1} log g'(b_i)
    for (int j = 0; j <= J; ++j) {
      if (j > 0) near_chain += ex.boundary_log_dg(j);
      double l2_near = 0.0;
      const double u_near = ex.leave(side, ex.boundary_s(j), l2_near);
      if (!(u_near > u_far)) {
        throw Error(ErrorKind::ToleranceFailure,
                    "branch R=" + std::to_string(j + 2) + " collapsed in chart coordinates");
      }
      Branch b = make_chart_branch(map, side, j, u_far, u_near, ldf_far + far_chain, l2_near + near_chain);
      out.push_back(b);
      u_near_side[si].push_back(u_near);
      far_chain += ex.boundary_log_dg(j);
      u_far = u_near;
      ldf_far = l2_near;
    }
  }

  // Midpoint samples, primitivity and endpoint certificates, periodic points.
  for (int si = 0; si < 2; ++si) {
    std::vector<Branch>& out = per_side[si];
    const Side side = si == 0 ? Side::Left : Side::Right;
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (out.size() + kChunk - 1) / kChunk;
    std::vector<double> residual(chunks, 0.0);
    parallel_chunks(chunks, [&](std::size_t ci) {
      const std::size_t end = std::min(out.size(), (ci + 1) * kChunk);
      for (std::size_t i = ci * kChunk; i < end; ++i) {
        Branch& b = out[i];
        const int j = b.depth();
        const double um = b.u_mid();
        double l2 = 0.0;
        const double w_mid = map.w_of(side, um);
        double s = ex.enter(side, um, l2);
        if (!(w_mid > w_a_plus)) {
          throw Error(ErrorKind::ToleranceFailure, "midpoint of R=" + std::to_string(b.R) +
                                                       " returns at time 1");
        }
        // Orbit points before time R must stay left of a_minus.
        double sum = 0.0;
        const double la = map.log_df0();
        for (int k = 0; k < j;) {
          if (!(s > s_a_minus)) {
            throw Error(ErrorKind::ToleranceFailure,
                        "midpoint of R=" + std::to_string(b.R) + " enters I early");
          }
          int m = 1;
          if (s >= Excursion::kLinearRegime + la) {
            m = std::min(j - k, static_cast<int>((s - Excursion::kLinearRegime) / la));
          }
          s = ex.push_forward(s, m, sum);
          k += m;
        }
        if (!(s > s_a_plus && s < s_a_minus)) {
          throw Error(ErrorKind::ToleranceFailure,
                      "midpoint of R=" + std::to_string(b.R) + " misses I at the return time");
        }
        b.log_df_mid = l2 + sum;

        // Endpoint certificates: f^R of each endpoint in log coordinates, accepted
        // within tol plus the image of a few ulps of the endpoint coordinate.
        double r_max = 0.0;
        for (int e = 0; e < 2; ++e) {
          const double u = e == 0 ? b.u_near() : b.u_far();
          const double target = e == 0 ? s_a_minus : s_a_plus;
          double d = 0.0;
          const double s_end = ex.push_forward(ex.enter(side, u, d), j, d);
          d = 0.0;
          const double s_ulp = ex.push_forward(ex.enter(side, std::nextafter(u, kInf), d), j, d);
          const double cert_tol = std::max(tol, 1e-13 * b.R) + 16.0 * std::abs(s_ulp - s_end);
          const double r = std::abs(s_end - target);
          if (r > cert_tol) {
            throw Error(ErrorKind::ToleranceFailure, "endpoint certificate of R=" + std::to_string(b.R) +
                                                         " off by " + format_double(r));
          }
          r_max = std::max(r_max, r);
        }
        residual[ci] = std::max(residual[ci], r_max);

        if (options.periodic_points) {
          auto h = [&](double u) {
            double d = 0.0;
            const double s_img = ex.push_forward(ex.enter(side, u, d), j, d);
            const double x = map.c() + sign_of(side) * std::exp(-u);
            return s_img + std::log(x);
          };
          const double u_p = root_or_endpoint(h, b.u_far(), b.u_near());
          double d = 0.0;
          (void)ex.push_forward(ex.enter(side, u_p, d), j, d);
          b.u_periodic = u_p;
          b.log_df_periodic = d;
        }
      }
    });
    for (double r : residual) scheme.max_endpoint_residual = std::max(scheme.max_endpoint_residual, r);
  }

  scheme.branches.reserve(2 * (J + 1));
  for (const Branch& b : per_side[0]) scheme.branches.push_back(b);
  for (auto it = per_side[1].rbegin(); it != per_side[1].rend(); ++it) scheme.branches.push_back(*it);

  scheme.log_tail.assign(n_max + 1, std::log(I.length()));
  for (int n = 2; n <= n_max; ++n) {
    scheme.log_tail[n] = log_add_exp(-u_near_side[0][n - 2], -u_near_side[1][n - 2]);
  }
  return scheme;
}

InducingScheme build_scheme(const FlatUnimodalMap& map, const NiceInterval& interval, int n_max,
                            double tol, const BuildOptions& options) {
  return build_scheme(std::make_shared<const FlatUnimodalMap>(map), interval, n_max, tol, options);
}

// ---------------------------------------------------------------------------

InducingScheme lap_tracker_scheme(const FlatUnimodalMap& map, const NiceInterval& I, int n_max,
                                  double tol, std::size_t max_pending) {
  if (n_max < 2) throw Error(ErrorKind::InvalidSpec, "n_max must be >= 2");
  InducingScheme scheme;
  scheme.map = std::make_shared<const FlatUnimodalMap>(map);
  scheme.interval = I;
  scheme.n_max = n_max;
  scheme.tol = tol;
  scheme.map_fingerprint = map.fingerprint();

  const double c = map.c();
  const double img_tol = 1e-12 * I.length();
  auto image = [&](double x, int k) {
    ChartPoint p = ChartPoint::plain(x);
    for (int i = 0; i < k; ++i) p = map.eval(p);
    return map.to_plain(p);
  };

  struct Pending {
    double lo, hi;
    int k;  // f^m(P) avoids I for 1 <= m <= k
  };
  std::deque<Pending> queue{{I.a_minus, c, 0}, {c, I.a_plus, 0}};
  std::vector<double> tail_mass(n_max + 1, 0.0);
  std::vector<double> unresolved(n_max + 1, 0.0);
  double max_residual = 0.0;

  while (!queue.empty()) {
    if (queue.size() > max_pending) {
      throw Error(ErrorKind::BudgetExceeded, "more than " + std::to_string(max_pending) + " pending laps");
    }
    const Pending P = queue.front();
    queue.pop_front();
    const int k1 = P.k + 1;
    const double ylo = image(P.lo, k1);
    const double yhi = image(P.hi, k1);
    const bool increasing = ylo < yhi;
    // Split points are preimages of a- and a+ under f^{k1} strictly inside P.
    std::vector<double> cuts{P.lo};
    std::vector<double> targets{I.a_minus, I.a_plus};
    if (!increasing) std::reverse(targets.begin(), targets.end());
    for (double a : targets) {
      const double lo_v = std::min(ylo, yhi), hi_v = std::max(ylo, yhi);
      if (a > lo_v + img_tol && a < hi_v - img_tol) {
        const double x = bisect([&](double z) { return image(z, k1) - a; }, P.lo, P.hi, 0.0);
        const double lo_b = std::nextafter(x, -kInf), hi_b = std::nextafter(x, kInf);
        const double r = std::min(std::abs(image(lo_b, k1) - a), std::abs(image(hi_b, k1) - a));
        max_residual = std::max(max_residual, r);
        cuts.push_back(x);
      }
    }
    cuts.push_back(P.hi);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = cuts[i], hi = cuts[i + 1];
      const double width = hi - lo;
      if (width <= tol * I.length() * 1e-3) {
        unresolved[k1] += width;
        continue;
      }
      const double mid = 0.5 * (lo + hi);
      const double ym = image(mid, k1);
      if (I.contains(ym)) {
        Branch b;
        b.R = k1;
        b.side = mid < c ? Side::Left : Side::Right;
        b.lo = map.from_plain(lo);
        b.hi = map.from_plain(hi);
        b.u_lo = -std::log(std::abs(lo - c));
        b.u_hi = -std::log(std::abs(hi - c));
        b.log_measure = std::log(width);
        double d = 0.0;
        (void)iterate_log_df(map, ChartPoint::plain(lo), k1, d);
        b.log_df_lo = d;
        d = 0.0;
        (void)iterate_log_df(map, ChartPoint::plain(mid), k1, d);
        b.log_df_mid = d;
        d = 0.0;
        (void)iterate_log_df(map, ChartPoint::plain(hi), k1, d);
        b.log_df_hi = d;
        const double xp = root_or_endpoint([&](double z) { return image(z, k1) - z; }, lo, hi);
        d = 0.0;
        (void)iterate_log_df(map, ChartPoint::plain(xp), k1, d);
        b.u_periodic = -std::log(std::abs(xp - c));
        b.log_df_periodic = d;
        scheme.branches.push_back(b);
      } else if (k1 < n_max) {
        queue.push_back({lo, hi, k1});
      } else {
        tail_mass[n_max] += width;
      }
    }
  }
  // |{R > n}| accumulated from the branches and the unresolved ledger.
  std::sort(scheme.branches.begin(), scheme.branches.end(),
            [&](const Branch& a, const Branch& b) { return map.to_plain(a.lo) < map.to_plain(b.lo); });
  std::vector<double> mass_by_R(n_max + 1, 0.0);
  for (const Branch& b : scheme.branches) mass_by_R[b.R] += b.lebesgue();
  scheme.log_tail.assign(n_max + 1, std::log(I.length()));
  // {R > n} is the union of the laps still pending after time n: tail_mass[n_max] plus
  // everything that returns later than n.
  double later = tail_mass[n_max];
  for (int n = n_max; n >= 1; --n) {
    scheme.log_tail[n] = std::log(later);
    later += mass_by_R[n];
  }
  for (double u : unresolved) scheme.unresolved_mass += u;
  scheme.max_endpoint_residual = max_residual;
  return scheme;
}

// ---------------------------------------------------------------------------

std::optional<long> return_time(const FlatUnimodalMap& map, const NiceInterval& I, ChartPoint x,
                                long cap) {
  auto inside = [&](ChartPoint p) {
    if (p.is_near_c()) return true;
    if (!p.is_plain()) return false;
    return I.contains(p.value);
  };
  x = map.normalize(x);
  if (!inside(x)) throw Error(ErrorKind::OutsideInterval, "point is not in I");
  if (x.is_plain() && x.value == map.c()) return std::nullopt;
  const double la = map.log_df0();
  long n = 0;
  ChartPoint p = x;
  while (n < cap) {
    if (p.tag == Chart::Near0 && p.value >= Excursion::kLinearRegime + la) {
      const long m = std::min<long>(cap - n, static_cast<long>((p.value - Excursion::kLinearRegime) / la));
      if (m > 0) {
        p.value -= static_cast<double>(m) * la;
        n += m;
        continue;
      }
    }
    p = map.eval(p);
    ++n;
    if (inside(p)) return n;
  }
  return std::nullopt;
}

double induced_log_derivative(const InducingScheme& scheme, const Branch& branch, ChartPoint x) {
  const FlatUnimodalMap& map = *scheme.map;
  x = map.normalize(x);
  const double off = x.is_near_c() ? sign_of(x.side()) : map.offset_from_c(x);
  const Side side = off < 0.0 ? Side::Left : Side::Right;
  const double u = chart_log_distance(map, x);
  const double slack = 1e-12 * std::max(1.0, branch.u_near());
  if (side != branch.side || off == 0.0 || u < branch.u_far() - slack || u > branch.u_near() + slack) {
    throw Error(ErrorKind::OutsideBranch, "point is not in the branch with R=" + std::to_string(branch.R));
  }
  double d = 0.0;
  (void)iterate_log_df(map, x, branch.R, d);
  return d;
}

// ---------------------------------------------------------------------------

TailTable tail_statistics(const InducingScheme& scheme, const TailFitOptions& options) {
  const FlatUnimodalMap& map = *scheme.map;
  const int n_max = scheme.n_max;
  TailTable table;
  table.unresolved_mass = scheme.unresolved_mass;

  std::vector<int> count(n_max + 1, 0);
  std::vector<double> mass(n_max + 1, 0.0);
  for (const Branch& b : scheme.branches) {
    if (b.R >= 1 && b.R <= n_max) {
      ++count[b.R];
      mass[b.R] += b.lebesgue();
    }
  }
  std::vector<double> tail_sum(n_max + 2, -kInf);
  for (int n = n_max; n >= 1; --n) tail_sum[n] = log_add_exp(tail_sum[n + 1], scheme.log_tail[n]);

  const double len = scheme.interval.length();
  double returned = 0.0;
  table.rows.reserve(n_max);
  for (int n = 1; n <= n_max; ++n) {
    returned += mass[n];
    const double resid = std::abs(returned + std::exp(scheme.log_tail[n]) + scheme.unresolved_mass - len);
    table.max_partition_residual = std::max(table.max_partition_residual, resid);
    table.rows.push_back({n, count[n], scheme.log_tail[n], tail_sum[n]});
  }
  table.tail_ratio = std::exp(scheme.log_tail[n_max] - scheme.log_tail[n_max - 1]);

  table.fit_lo = options.n_lo > 0 ? options.n_lo : std::max(2, n_max / 100);
  table.fit_hi = options.n_hi > 0 ? std::min(options.n_hi, n_max) : n_max;
  table.stretched_exponent = options.stretched_exponent > 0.0 ? options.stretched_exponent
                             : map.spec().family == Family::LogFlat ? 1.0 / (map.spec().alpha + 1.0)
                                                                    : 0.5;
  std::vector<int> ns;
  const int samples = std::max(2, options.samples);
  const double l0 = std::log(static_cast<double>(table.fit_lo));
  const double l1 = std::log(static_cast<double>(table.fit_hi));
  for (int i = 0; i < samples; ++i) {
    const int n = static_cast<int>(std::lround(std::exp(l0 + (l1 - l0) * i / (samples - 1))));
    if (ns.empty() || n > ns.back()) ns.push_back(n);
  }
  std::vector<double> lx, sx, ly;
  for (int n : ns) {
    lx.push_back(std::log(static_cast<double>(n)));
    sx.push_back(std::pow(static_cast<double>(n), table.stretched_exponent));
    ly.push_back(scheme.log_tail[n]);
  }
  table.polynomial = linear_fit(lx, ly);
  table.stretched = linear_fit(sx, ly);
  return table;
}

}  // namespace flatcrit
