#include "flatcrit/thermo.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>

#include "flatcrit/error.hpp"

namespace flatcrit {

namespace {


Side side_of(int si) { return si == 0 ? Side::Left : Side::Right; }

// g-preimage chain s_m = -log g^{-m}(x), m = 0..J, and prefix sums of log g' at z_1..z_m.
void preimage_chain(const Excursion& ex, double x, int J, std::vector<double>& s, std::vector<double>& lg) {
  const FlatUnimodalMap& map = ex.map();
  const double la = map.log_df0();
  s.assign(J + 1, 0.0);
  lg.assign(J + 1, 0.0);
  s[0] = -std::log(x);
  int linear_start = -1;
  for (int m = 1; m <= J; ++m) {
    if (linear_start < 0 && s[m - 1] >= Excursion::kLinearRegime) linear_start = m - 1;
    if (linear_start >= 0) {
      s[m] = s[linear_start] + static_cast<double>(m - linear_start) * la;
    } else {
      s[m] = map.g_step_inverse(s[m - 1]);
    }
    lg[m] = lg[m - 1] + map.log_dg(s[m]);
  }
}

}  // namespace

std::string_view sign_name(FreezeRow::Sign s) {
  switch (s) {
    case FreezeRow::Sign::Positive: return "positive";
    case FreezeRow::Sign::Negative: return "negative";
    case FreezeRow::Sign::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

// ---------------------------------------------------------------------------
// Truncation model

TruncationModel truncation_model(const InducingScheme& scheme) {
  TruncationModel m;
  m.n_max = scheme.n_max;
  std::vector<int> count(scheme.n_max + 1, 0);
  for (const Branch& b : scheme.branches) ++count[b.R];
  std::vector<double> xs, ys;
  for (int n = 2; n <= scheme.n_max; ++n) {
    if (count[n] > 0) {
      xs.push_back(n);
      ys.push_back(std::log(static_cast<double>(count[n])));
    }
  }
  const double growth = xs.size() >= 2 ? linear_fit(xs, ys).slope : 0.0;
  m.log_gamma = 1.1 * std::max(growth, 0.0);
  double best = -kInf;
  for (std::size_t k = 0; k < xs.size(); ++k) best = std::max(best, ys[k] - xs[k] * m.log_gamma);
  m.log_c_gamma = std::log(1.1) + best;

  m.chi_inf = kInf;
  m.chi_sup = -kInf;
  for (const Branch& b : scheme.branches) {
    const double lo = std::isfinite(b.log_df_periodic) ? b.log_df_periodic : b.log_df_min();
    const double hi = std::isfinite(b.log_df_periodic) ? b.log_df_periodic : b.log_df_max();
    m.chi_inf = std::min(m.chi_inf, lo / b.R);
    m.chi_sup = std::max(m.chi_sup, hi / b.R);
  }
  const double log_k = std::log(scheme.interval.K_tau);
  m.log_C1 = kInf;
  m.log_C2 = -kInf;
  for (const Branch& b : scheme.branches) {
    m.log_C1 = std::min(m.log_C1, b.log_df_min() - m.chi_inf * b.R - log_k);
    m.log_C2 = std::max(m.log_C2, b.log_df_max() - m.chi_sup * b.R + log_k);
  }
  return m;
}

double TruncationModel::log_tail(double t, double p) const {
  const double chi = t >= 0.0 ? chi_inf : chi_sup;
  const double log_c = -t * (t >= 0.0 ? log_C1 : log_C2);
  const double rate = p + t * chi - log_gamma;
  if (!(rate > 0.0)) return kInf;
  return log_c_gamma + log_c - (n_max + 1.0) * rate - std::log(-std::expm1(-rate));
}

double TruncationModel::log_tail_moment(double t, double p) const {
  const double chi = t >= 0.0 ? chi_inf : chi_sup;
  const double log_c = -t * (t >= 0.0 ? log_C1 : log_C2);
  const double rate = p + t * chi - log_gamma;
  if (!(rate > 0.0)) return kInf;
  const double one_minus_x = -std::expm1(-rate);
  return log_c_gamma + log_c - (n_max + 1.0) * rate + std::log1p(n_max * one_minus_x) -
         2.0 * std::log(one_minus_x);
}

// ---------------------------------------------------------------------------
// One-level sum

LevelSum level_sum(const InducingScheme& scheme, double t, double p) {
  const TruncationModel trunc = truncation_model(scheme);
  const double log_tail = trunc.log_tail(t, p);
  if (!std::isfinite(log_tail)) {
    throw Error(ErrorKind::Divergent, "truncation series diverges at t=" + format_double(t) +
                                          ", p=" + format_double(p));
  }
  const double log_k = std::log(scheme.interval.K_tau);
  LogSum value, upper;
  for (const Branch& b : scheme.branches) {
    const double ld = t >= 0.0 ? b.log_df_min() : b.log_df_max();
    const double lw = -p * b.R - t * ld;
    value.add(lw);
    upper.add(lw + std::abs(t) * log_k);
  }
  return {std::exp(value.value()), std::exp(upper.value()), std::exp(log_tail)};
}

// ---------------------------------------------------------------------------
// Transfer model

TransferModel::TransferModel(const InducingScheme& scheme, const TransferOptions& options)
    : scheme_(scheme), ex_(scheme.map, scheme.interval), options_(options) {
  if (options_.nodes < 4 || options_.nodes % 2 != 0) {
    throw Error(ErrorKind::InvalidSpec, "transfer model needs an even node count >= 4");
  }
  if (!(options_.p_lo < options_.p_hi)) throw Error(ErrorKind::InvalidSpec, "empty pressure search range");
  J_ = scheme_.n_max - 2;
  if (static_cast<int>(scheme_.branches.size()) != 2 * (J_ + 1)) {
    throw Error(ErrorKind::InvalidSpec, "transfer model needs exactly two branches per return time");
  }
  for (int si = 0; si < 2; ++si) {
    for (int j = 0; j <= J_; ++j) {
      if (scheme_.find(side_of(si), j + 2) < 0) {
        throw Error(ErrorKind::InvalidSpec, "scheme is missing branch R=" + std::to_string(j + 2));
      }
    }
  }
  trunc_ = truncation_model(scheme_);
  ex_.extend_boundary(J_);

  const NiceInterval& I = scheme_.interval;
  const int n = options_.nodes;
  const int M = n - 1;
  const double mid = 0.5 * (I.a_minus + I.a_plus);
  const double half = 0.5 * I.length();
  const double c = scheme_.map->c();
  nodes_.resize(n);
  bary_.resize(n);
  node_offset_.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes_[k] = mid + half * std::cos(std::numbers::pi * k / M);
    bary_[k] = (k % 2 == 0 ? 1.0 : -1.0) * (k == 0 || k == M ? 0.5 : 1.0);
  }
  nodes_.front() = I.a_plus;
  nodes_.back() = I.a_minus;
  for (int k = 0; k < n; ++k) node_offset_[k] = c - nodes_[k];

  std::vector<double> checks;
  for (int k = 0; k < n; ++k) {
    checks.push_back(nodes_[k]);
    if (k + 1 < n) checks.push_back(0.5 * (nodes_[k] + nodes_[k + 1]));
  }
  node_data_.resize(n);
  node_chain_.resize(n);
  check_data_.resize(checks.size());
  parallel_chunks(n, [&](std::size_t i) { node_data_[i] = make_point(nodes_[i], &node_chain_[i]); });
  parallel_chunks(checks.size(), [&](std::size_t i) { check_data_[i] = make_point(checks[i], nullptr); });
}

TransferModel::PointData TransferModel::make_point(double x, std::vector<double>* chain) const {
  const FlatUnimodalMap& map = ex_.map();
  PointData pt;
  pt.x = x;
  std::vector<double> s, lg;
  preimage_chain(ex_, x, J_, s, lg);
  for (int si = 0; si < 2; ++si) {
    const Side side = side_of(si);
    pt.u[si].resize(J_ + 1);
    pt.log_d[si].resize(J_ + 1);
    for (int j = 0; j <= J_; ++j) {
      const double w = map.near1_step_inverse(s[j]);
      const double u = map.u_of(side, w);
      pt.u[si][j] = u;
      pt.log_d[si][j] = map.log_df_at(side, u) + map.log_df_near1(w) + lg[j];
    }
  }
  if (chain) *chain = std::move(s);
  return pt;
}

double TransferModel::interpolate(const std::vector<double>& values, double delta) const {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double d = node_offset_[k] + delta;
    if (d == 0.0) return values[k];
    const double q = bary_[k] / d;
    num += q * values[k];
    den += q;
  }
  return num / den;
}

TransferModel::Operator TransferModel::build(double t, double p) const {
  const int n = node_count();
  Operator op;
  op.shift = -kInf;
  for (const PointData& pt : node_data_) {
    for (int si = 0; si < 2; ++si) {
      for (int j = 0; j <= J_; ++j) op.shift = std::max(op.shift, -p * (j + 2) - t * pt.log_d[si][j]);
    }
  }
  op.A.assign(static_cast<std::size_t>(n) * n, 0.0);
  parallel_chunks(n, [&](std::size_t i) {
    const PointData& pt = node_data_[i];
    double* row = op.A.data() + i * n;
    std::vector<double> q(n);
    for (int si = 0; si < 2; ++si) {
      const double sigma = sign_of(side_of(si));
      for (int j = 0; j <= J_; ++j) {
        const double W = std::exp(-p * (j + 2) - t * pt.log_d[si][j] - op.shift);
        if (W == 0.0) continue;
        const double delta = sigma * std::exp(-pt.u[si][j]);
        double den = 0.0;
        int hit = -1;
        for (int k = 0; k < n; ++k) {
          const double d = node_offset_[k] + delta;
          if (d == 0.0) {
            hit = k;
            break;
          }
          q[k] = bary_[k] / d;
          den += q[k];
        }
        if (hit >= 0) {
          row[hit] += W;
          continue;
        }
        const double scale = W / den;
        for (int k = 0; k < n; ++k) row[k] += scale * q[k];
      }
    }
  });
  return op;
}

std::vector<double> TransferModel::power(const Operator& op, bool transpose, double& log_rho) const {
  const int n = node_count();
  std::vector<double> v(n, 1.0), w(n);
  double rho = 0.0;
  for (int it = 0; it < options_.max_iterations; ++it) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        acc += (transpose ? op.A[static_cast<std::size_t>(k) * n + i] : op.A[static_cast<std::size_t>(i) * n + k]) * v[k];
      }
      w[i] = acc;
    }
    double mx = 0.0;
    for (double x : w) mx = std::max(mx, std::abs(x));
    if (!(mx > 0.0) || !std::isfinite(mx)) {
      throw Error(ErrorKind::ToleranceFailure, "transfer operator power iteration broke down");
    }
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] /= mx;
      change = std::max(change, std::abs(w[i] - v[i]));
    }
    v.swap(w);
    rho = mx;
    if (change <= options_.tolerance) break;
  }
  log_rho = std::log(rho) + op.shift;
  return v;
}

double TransferModel::log_apply_at(const PointData& pt, const std::vector<double>& g, double t,
                                   double p) const {
  double shift = -kInf;
  for (int si = 0; si < 2; ++si) {
    for (int j = 0; j <= J_; ++j) shift = std::max(shift, -p * (j + 2) - t * pt.log_d[si][j]);
  }
  double acc = 0.0;
  for (int si = 0; si < 2; ++si) {
    const double sigma = sign_of(side_of(si));
    for (int j = 0; j <= J_; ++j) {
      const double W = std::exp(-p * (j + 2) - t * pt.log_d[si][j] - shift);
      if (W == 0.0) continue;
      acc += W * interpolate(g, sigma * std::exp(-pt.u[si][j]));
    }
  }
  return acc > 0.0 ? std::log(acc) + shift : kNaN;
}

namespace {

struct RawBracket {
  double lo = 0.0;
  double hi_nt = 0.0;  // upper bound without the truncated tail
  double hi = 0.0;
};

}  // namespace

PressureBracket TransferModel::pressure_bracket(double t, double p, int depth) const {
  if (depth < 1) throw Error(ErrorKind::InvalidSpec, "depth must be >= 1");
  const double log_tail = trunc_.log_tail(t, p);
  if (!std::isfinite(log_tail)) {
    throw Error(ErrorKind::Divergent, "truncation series diverges at t=" + format_double(t) +
                                          ", p=" + format_double(p));
  }
  const Operator op = build(t, p);
  double log_rho = 0.0;
  const std::vector<double> g = power(op, false, log_rho);

  // Collatz-Wielandt bounds at the check points.
  const double c = scheme_.map->c();
  std::vector<double> ratio(check_data_.size(), kNaN), gval(check_data_.size(), kNaN);
  parallel_chunks(check_data_.size(), [&](std::size_t e) {
    const double ge = interpolate(g, check_data_[e].x - c);
    gval[e] = ge;
    if (ge > 0.0) ratio[e] = log_apply_at(check_data_[e], g, t, p) - std::log(ge);
  });
  bool cw_ok = true;
  double cw_lo = kInf, cw_hi = -kInf, g_min = kInf, g_max = -kInf;
  for (std::size_t e = 0; e < ratio.size(); ++e) {
    if (!std::isfinite(ratio[e])) {
      cw_ok = false;
      continue;
    }
    cw_lo = std::min(cw_lo, ratio[e]);
    cw_hi = std::max(cw_hi, ratio[e]);
    g_min = std::min(g_min, gval[e]);
    g_max = std::max(g_max, gval[e]);
  }

  // Distortion bound from L^n 1 at the nodes.
  const int n = node_count();
  std::vector<double> v(n, 1.0), w(n);
  double log_scale = 0.0;
  for (int step = 0; step < depth; ++step) {
    double mx = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += op.A[static_cast<std::size_t>(i) * n + k] * v[k];
      w[i] = acc;
      mx = std::max(mx, acc);
    }
    for (int i = 0; i < n; ++i) v[i] = w[i] / mx;
    log_scale += std::log(mx) + op.shift;
  }
  double vmin = kInf, vmax = -kInf;
  for (double x : v) {
    vmin = std::min(vmin, x);
    vmax = std::max(vmax, x);
  }
  double k_lo = kNaN, k_hi = kNaN;
  if (vmin > 0.0) {
    k_lo = (log_scale + std::log(vmin)) / depth;
    k_hi = (log_scale + std::log(vmax)) / depth;
  }

  double lo = 0.0, hi_nt = 0.0;
  if (cw_ok && std::isfinite(k_lo)) {
    lo = std::max(cw_lo, k_lo);
    hi_nt = std::min(cw_hi, k_hi);
    if (lo > hi_nt) {
      lo = std::min(cw_lo, k_lo);
      hi_nt = std::max(cw_hi, k_hi);
    }
  } else if (cw_ok) {
    lo = cw_lo;
    hi_nt = cw_hi;
  } else if (std::isfinite(k_lo)) {
    lo = k_lo;
    hi_nt = k_hi;
    g_min = vmin;
    g_max = vmax;
  } else {
    throw Error(ErrorKind::ToleranceFailure, "no positive eigenfunction approximation");
  }
  const double spread = std::log(g_max) - std::log(g_min);
  PressureBracket br;
  br.t = t;
  br.p = p;
  br.depth = depth;
  br.lo = lo;
  br.hi = log_add_exp(hi_nt, log_tail + spread);
  br.truncation_error = br.hi - hi_nt;
  br.distortion_width = hi_nt - lo;
  return br;
}

PressureBracket TransferModel::solve_pressure(double t, int depth) const {
  auto eval = [&](double p) -> PressureBracket {
    try {
      return pressure_bracket(t, p, depth);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Divergent) throw;
      PressureBracket b;
      b.lo = kNaN;
      b.hi = kInf;
      return b;
    }
  };
  auto lo_at = [&](double p) {
    const PressureBracket b = eval(p);
    if (std::isnan(b.lo)) {
      // Divergent tail: the truncated part alone still bounds from below.
      const Operator op = build(t, p);
      double lr = 0.0;
      (void)power(op, false, lr);
      return lr;
    }
    return b.lo;
  };
  auto clamp = [](double v) { return std::isfinite(v) ? v : (v > 0 ? 1e300 : -1e300); };

  using boost::math::tools::toms748_solve;
  const double a = options_.p_lo, b = options_.p_hi;
  auto root_tol = [](double x, double y) { return std::abs(x - y) <= 1e-13 * std::max(1.0, std::abs(x)); };
  const double lo_a = lo_at(a), lo_b = lo_at(b);
  if (!(lo_a > 0.0 && lo_b < 0.0)) {
    throw Error(ErrorKind::NoSignChange, "pressure lower bound does not cross zero on [" + format_double(a) +
                                             ", " + format_double(b) + "]: " + format_double(lo_a) + ", " +
                                             format_double(lo_b));
  }
  std::uintmax_t iters = 100;
  const auto r_lo = toms748_solve([&](double p) { return clamp(lo_at(p)); }, a, b, clamp(lo_a), clamp(lo_b),
                                  root_tol, iters);
  // Outer ends of the final root brackets, so the interval keeps the solver tolerance.
  const double p_lo = r_lo.first;

  auto hi_at = [&](double p) { return clamp(eval(p).hi); };
  auto hi_nt_at = [&](double p) {
    const PressureBracket br = eval(p);
    return clamp(br.hi - br.truncation_error);
  };
  // Both upper bounds are >= lo, so their roots lie to the right of p_lo.
  auto root_right = [&](const std::function<double(double)>& f) {
    double left = p_lo;
    double f_left = f(left);
    if (f_left <= 0.0) return left;
    double step = 1e-3;
    double right = std::min(b, left + step);
    double f_right = f(right);
    while (f_right > 0.0) {
      if (right >= b) {
        throw Error(ErrorKind::NoSignChange, "pressure upper bound does not cross zero below p=" + format_double(b));
      }
      left = right;
      f_left = f_right;
      step *= 4.0;
      right = std::min(b, right + step);
      f_right = f(right);
    }
    std::uintmax_t it = 100;
    const auto r = toms748_solve(f, left, right, f_left, f_right, root_tol, it);
    return r.second;
  };
  const double p_hi = root_right(hi_at);
  const double p_hi_nt = std::min(root_right(hi_nt_at), p_hi);

  PressureBracket out;
  out.t = t;
  out.depth = depth;
  out.lo = p_lo;
  out.hi = p_hi;
  out.p = 0.5 * (p_lo + p_hi);
  out.truncation_error = p_hi - p_hi_nt;
  out.distortion_width = p_hi_nt - p_lo;
  return out;
}

TransferModel::Spectral TransferModel::spectral(double t, double p) const {
  const Operator op = build(t, p);
  Spectral sp;
  sp.t = t;
  sp.p = p;
  double log_rho = 0.0, log_rho_left = 0.0;
  sp.h = power(op, false, log_rho);
  sp.nu = power(op, true, log_rho_left);
  sp.log_lambda = log_rho;
  const int n = node_count();
  double norm = 0.0;
  for (int i = 0; i < n; ++i) norm += sp.nu[i] * sp.h[i];
  for (double& x : sp.nu) x /= norm;
  const double rho = std::exp(log_rho - op.shift);
  sp.omega.assign(static_cast<std::size_t>(n) * 2 * (J_ + 1), 0.0);
  parallel_chunks(n, [&](std::size_t i) {
    const PointData& pt = node_data_[i];
    for (int si = 0; si < 2; ++si) {
      const double sigma = sign_of(side_of(si));
      for (int j = 0; j <= J_; ++j) {
        const double W = std::exp(-p * (j + 2) - t * pt.log_d[si][j] - op.shift);
        if (W == 0.0) continue;
        const double hy = interpolate(sp.h, sigma * std::exp(-pt.u[si][j]));
        sp.omega[omega_index(static_cast<int>(i), si, j)] = sp.nu[i] * W * hy / rho;
      }
    }
  });
  const double total = std::accumulate(sp.omega.begin(), sp.omega.end(), 0.0);
  for (double& x : sp.omega) x /= total;
  return sp;
}

// ---------------------------------------------------------------------------
// Gibbs cylinders

GibbsCylinderMeasure TransferModel::gibbs_cylinders(double t, double p, int depth, int alphabet) const {
  if (depth < 1 || depth > 3) throw Error(ErrorKind::InvalidSpec, "gibbs depth must be 1, 2 or 3");
  if (!std::isfinite(trunc_.log_tail(t, p))) {
    throw Error(ErrorKind::Divergent, "level sum diverges at t=" + format_double(t) + ", p=" + format_double(p));
  }
  const auto& br = scheme_.branches;
  const std::size_t nb = br.size();
  GibbsCylinderMeasure g;
  g.depth = depth;
  g.t = t;
  g.p = p;

  std::vector<double> log_w1(nb);
  LogSum z1;
  for (std::size_t b = 0; b < nb; ++b) {
    log_w1[b] = -p * br[b].R - t * br[b].log_df_mid;
    z1.add(log_w1[b]);
  }
  std::vector<int> letters(nb);
  std::iota(letters.begin(), letters.end(), 0);
  if (depth > 1) {
    const int max_words = 4096;
    int k = std::max(2, std::min(alphabet, static_cast<int>(std::floor(std::pow(max_words, 1.0 / depth)))));
    k = std::min<int>(k, static_cast<int>(nb));
    std::stable_sort(letters.begin(), letters.end(), [&](int a, int b) { return log_w1[a] > log_w1[b]; });
    letters.resize(k);
    std::sort(letters.begin(), letters.end());
    LogSum za;
    for (int a : letters) za.add(log_w1[a]);
    g.alphabet_mass = std::exp(za.value() - z1.value());
  }

  // Enumerate words; the representative point is the composite pull-back of the
  // midpoint of the last letter's branch.
  const std::size_t K = letters.size();
  std::size_t total = 1;
  for (int d = 0; d < depth; ++d) total *= K;
  g.words.resize(total);
  g.returns.resize(total);
  std::vector<double> log_w(total), log_d(total);
  const FlatUnimodalMap& map = ex_.map();
  parallel_chunks((total + 255) / 256, [&](std::size_t chunk) {
    const std::size_t end = std::min(total, (chunk + 1) * 256);
    for (std::size_t idx = chunk * 256; idx < end; ++idx) {
      std::vector<int> word(depth);
      std::size_t rest = idx;
      for (int d = depth - 1; d >= 0; --d) {
        word[d] = letters[rest % K];
        rest /= K;
      }
      const Branch& last = br[word.back()];
      double ld = last.log_df_mid;
      int R = last.R;
      double y = map.c() + sign_of(last.side) * std::exp(-last.u_mid());
      for (int d = depth - 2; d >= 0; --d) {
        const Branch& b = br[word[d]];
        const auto [u, l] = ex_.inverse_branch(b.side, b.depth(), -std::log(y));
        ld += l;
        R += b.R;
        y = map.c() + sign_of(b.side) * std::exp(-u);
      }
      g.words[idx] = std::move(word);
      g.returns[idx] = R;
      log_d[idx] = ld;
      log_w[idx] = -p * R - t * ld;
    }
  });
  LogSum z;
  for (double lw : log_w) z.add(lw);
  g.log_normalization = z.value();
  g.weights.resize(total);
  for (std::size_t i = 0; i < total; ++i) g.weights[i] = std::exp(log_w[i] - g.log_normalization);

  // Observed Gibbs constants against the equilibrium measure of the induced map.
  const Spectral sp = spectral(t, p);
  const double P = sp.log_lambda;
  const int nn = node_count();
  g.log_C1 = kInf;
  g.log_C2 = -kInf;
  const std::size_t probe = std::min<std::size_t>(total, 4096);
  std::vector<double> lr(probe, kNaN);
  parallel_chunks((probe + 63) / 64, [&](std::size_t chunk) {
    const std::size_t end = std::min(probe, (chunk + 1) * 64);
    for (std::size_t idx = chunk * 64; idx < end; ++idx) {
      const auto& word = g.words[idx];
      double mass = 0.0;
      for (int i = 0; i < nn; ++i) {
        double y = nodes_[i];
        double ld = 0.0;
        double delta = 0.0;
        for (int d = depth - 1; d >= 0; --d) {
          const Branch& b = br[word[d]];
          const auto [u, l] = ex_.inverse_branch(b.side, b.depth(), -std::log(y));
          ld += l;
          delta = sign_of(b.side) * std::exp(-u);
          y = map.c() + delta;
        }
        const double W = std::exp(-p * g.returns[idx] - t * ld - depth * P);
        mass += sp.nu[i] * W * interpolate(sp.h, delta);
      }
      if (mass > 0.0) lr[idx] = std::log(mass) + depth * P + p * g.returns[idx] + t * log_d[idx];
    }
  });
  for (double v : lr) {
    if (!std::isfinite(v)) continue;
    g.log_C1 = std::min(g.log_C1, v);
    g.log_C2 = std::max(g.log_C2, v);
  }
  return g;
}

RefinementCheck TransferModel::refinement_consistency(const GibbsCylinderMeasure& coarse,
                                                      const GibbsCylinderMeasure& fine) const {
  if (fine.depth != coarse.depth + 1) throw Error(ErrorKind::InvalidSpec, "refinement needs consecutive depths");
  // Letters used by the fine measure; the coarse measure is restricted to them.
  std::vector<char> in_alphabet(scheme_.branches.size(), 0);
  for (const auto& w : fine.words) {
    for (int a : w) in_alphabet[a] = 1;
  }
  std::map<std::vector<int>, double> coarse_w, fine_sum;
  double coarse_total = 0.0, fine_total = 0.0;
  for (std::size_t i = 0; i < coarse.words.size(); ++i) {
    const auto& w = coarse.words[i];
    if (std::all_of(w.begin(), w.end(), [&](int a) { return in_alphabet[a] != 0; })) {
      coarse_w[w] = coarse.weights[i];
      coarse_total += coarse.weights[i];
    }
  }
  for (std::size_t i = 0; i < fine.words.size(); ++i) {
    std::vector<int> prefix(fine.words[i].begin(), fine.words[i].end() - 1);
    fine_sum[prefix] += fine.weights[i];
    fine_total += fine.weights[i];
  }
  RefinementCheck rc;
  rc.bound = std::abs(fine.t) * std::log(scheme_.interval.K_tau);
  rc.min_log_ratio = kInf;
  rc.max_log_ratio = -kInf;
  for (const auto& [w, cw] : coarse_w) {
    const auto it = fine_sum.find(w);
    if (it == fine_sum.end() || cw <= 0.0) continue;
    const double r = std::log(it->second / fine_total) - std::log(cw / coarse_total);
    rc.min_log_ratio = std::min(rc.min_log_ratio, r);
    rc.max_log_ratio = std::max(rc.max_log_ratio, r);
  }
  const double slack = 1e-10;
  rc.pass = rc.max_log_ratio <= rc.bound + slack && rc.min_log_ratio >= -rc.bound - slack;
  return rc;
}

// ---------------------------------------------------------------------------
// Equilibrium states

EquilibriumReport TransferModel::equilibrium_report(double t, int depth,
                                                    const std::vector<Observable>& observables) const {
  return equilibrium_at(solve_pressure(t, depth), observables);
}

EquilibriumReport TransferModel::equilibrium_at(const PressureBracket& P,
                                                const std::vector<Observable>& observables) const {
  EquilibriumReport rep;
  const double t = P.t;
  const int depth = P.depth;
  rep.t = t;
  rep.P = P;
  const double p = rep.P.mid();
  const Spectral sp = spectral(t, p);
  const int n = node_count();
  const FlatUnimodalMap& map = ex_.map();

  double m_R = 0.0, m_D = 0.0, m_h = 0.0;
  for (int i = 0; i < n; ++i) {
    const double log_hx = std::log(sp.h[i]);
    for (int si = 0; si < 2; ++si) {
      const double sigma = sign_of(side_of(si));
      for (int j = 0; j <= J_; ++j) {
        const double w = sp.omega[omega_index(i, si, j)];
        if (w == 0.0) continue;
        m_R += w * (j + 2);
        m_D += w * node_data_[i].log_d[si][j];
        const double hy = interpolate(sp.h, sigma * std::exp(-node_data_[i].u[si][j]));
        m_h += w * (log_hx - std::log(hy));
      }
    }
  }
  rep.mean_return = m_R;
  rep.chi = m_D / m_R;
  rep.entropy = (sp.log_lambda + t * m_D + p * m_R + m_h) / m_R;
  rep.identity_residual = std::abs(rep.entropy - t * rep.chi - rep.P.mid());

  const double hmin = *std::min_element(sp.h.begin(), sp.h.end());
  const double log_moment = trunc_.log_tail_moment(t, p);
  rep.tail_share = std::exp(log_moment - sp.log_lambda - std::log(hmin)) / m_R;
  if (rep.tail_share > 0.1) {
    throw Error(ErrorKind::TailDominated, "truncated branches carry " + format_double(rep.tail_share) +
                                              " of the return-time moment at t=" + format_double(t));
  }

  const double hp = 1e-4;
  const double d_plus = pressure_bracket(t, p + hp, depth).mid();
  const double d_minus = pressure_bracket(t, p - hp, depth).mid();
  const double dP = (d_plus - d_minus) / (2.0 * hp);
  rep.kac_defect = std::abs(-dP / m_R - 1.0);

  // Lift formula: each (node, branch) weight spreads over y, f(y), z_j, ..., z_1.
  for (const Observable& phi : observables) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::vector<double>& chain = node_chain_[i];
      std::vector<double> prefix(J_ + 1, 0.0);
      for (int m = 1; m <= J_; ++m) prefix[m] = prefix[m - 1] + phi(map, map.normalize(ChartPoint::near0(chain[m])));
      for (int si = 0; si < 2; ++si) {
        const Side side = side_of(si);
        for (int j = 0; j <= J_; ++j) {
          const double w = sp.omega[omega_index(i, si, j)];
          if (w == 0.0) continue;
          const ChartPoint y = map.normalize(ChartPoint::near_c(side, node_data_[i].u[si][j]));
          acc += w * (phi(map, y) + phi(map, map.eval(y)) + prefix[j]);
        }
      }
    }
    rep.observable_expectations[phi.name()] = acc / m_R;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Freezing scan

double acim_log_df_integral(const FlatUnimodalMap& map) {
  using boost::math::quadrature::exp_sinh;
  using boost::math::quadrature::gauss_kronrod;
  const double c = map.c();
  const double s0 = map.window();
  auto plain = [&](double x) { return map.log_derivative(ChartPoint::plain(x)); };
  double total = gauss_kronrod<double, 61>::integrate(plain, 0.0, c - s0, 15, 1e-13);
  total += gauss_kronrod<double, 61>::integrate(plain, c + s0, 1.0, 15, 1e-13);
  const double ub = map.window_log_distance();
  exp_sinh<double> es;
  for (Side side : {Side::Left, Side::Right}) {
    auto f = [&](double v) {
      const double u = ub + v;
      if (u > 700.0) return 0.0;
      return map.log_df_at(side, u) * std::exp(-u);
    };
    total += es.integrate(f, 0.0, kInf);
  }
  return total;
}

FreezeReport TransferModel::freeze_scan(const std::vector<double>& t_grid, int depth) const {
  if (t_grid.empty()) throw Error(ErrorKind::InvalidSpec, "empty t grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0 && t_grid[i] <= 1.2) || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
      throw Error(ErrorKind::InvalidSpec, "t grid must be ascending inside (0, 1.2]");
    }
  }
  FreezeReport rep;
  for (double t : t_grid) {
    FreezeRow row;
    row.t = t;
    row.P = solve_pressure(t, depth);
    row.sign = row.P.lo > 0.0   ? FreezeRow::Sign::Positive
               : row.P.hi < 0.0 ? FreezeRow::Sign::Negative
                                : FreezeRow::Sign::Inconclusive;
    if (row.sign == FreezeRow::Sign::Positive) {
      rep.t_plus = t;
      rep.t_plus_found = true;
    }
    rep.rows.push_back(row);
  }
  std::vector<int> levels;
  for (int n = 10; n < scheme_.n_max; n *= 10) levels.push_back(n);
  levels.push_back(scheme_.n_max);
  for (int level : levels) {
    ChiTrendRow r;
    r.n = level;
    r.chi_inf = kInf;
    r.chi_sup = -kInf;
    for (const Branch& b : scheme_.branches) {
      if (b.R > level || !std::isfinite(b.log_df_periodic)) continue;
      r.chi_inf = std::min(r.chi_inf, b.log_df_periodic / b.R);
      r.chi_sup = std::max(r.chi_sup, b.log_df_periodic / b.R);
    }
    rep.chi_trend.push_back(r);
  }
  rep.acim_integral = acim_log_df_integral(ex_.map());
  rep.acim_finite = std::isfinite(rep.acim_integral);
  return rep;
}

// ---------------------------------------------------------------------------

PressureBracket pressure_bracket(const InducingScheme& scheme, double t, double p, int depth) {
  return TransferModel(scheme).pressure_bracket(t, p, depth);
}

PressureBracket solve_pressure(const InducingScheme& scheme, double t, int depth) {
  return TransferModel(scheme).solve_pressure(t, depth);
}

GibbsCylinderMeasure gibbs_cylinders(const InducingScheme& scheme, double t, double p, int depth) {
  return TransferModel(scheme).gibbs_cylinders(t, p, depth);
}

EquilibriumReport equilibrium_report(const InducingScheme& scheme, double t, int depth,
                                     const std::vector<Observable>& observables) {
  return TransferModel(scheme).equilibrium_report(t, depth, observables);
}

FreezeReport freeze_scan(const InducingScheme& scheme, const std::vector<double>& t_grid, int depth) {
  return TransferModel(scheme).freeze_scan(t_grid, depth);
}

}  // namespace flatcrit
