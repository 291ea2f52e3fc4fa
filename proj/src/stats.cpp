#include "flatcrit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flatcrit/error.hpp"

namespace flatcrit {

namespace {

struct Segment {
  std::uint64_t seed;
  long length;
};

std::vector<Segment> split(std::uint64_t seed, long N) {
  const int S = segment_count(N);
  std::vector<Segment> out(S);
  for (int s = 0; s < S; ++s) {
    out[s].seed = substream_seed(seed, static_cast<std::uint64_t>(s));
    out[s].length = N / S + (s < N % S ? 1 : 0);
  }
  return out;
}

// Lagged cross-products a_{k+n} b_k with a ring buffer of past b values.
struct LagAccumulator {
  explicit LagAccumulator(const std::vector<int>& lags)
      : lags_(lags), max_lag_(lags.empty() ? 0 : lags.back()), ring_(max_lag_ + 1), acc_(lags.size(), 0.0),
        count_(lags.size(), 0) {}

  void push(double a, double b) {
    ring_[static_cast<std::size_t>(k_ % (max_lag_ + 1))] = b;
    for (std::size_t l = 0; l < lags_.size(); ++l) {
      const long n = lags_[l];
      if (n > k_) break;
      acc_[l] += a * ring_[static_cast<std::size_t>((k_ - n) % (max_lag_ + 1))];
      ++count_[l];
    }
    sum_a_ += a;
    sum_b_ += b;
    sum_aa_ += a * a;
    sum_bb_ += b * b;
    b_min_ = std::min(b_min_, b);
    b_max_ = std::max(b_max_, b);
    ++k_;
  }

  std::vector<int> lags_;
  long max_lag_;
  std::vector<double> ring_;
  std::vector<double> acc_;
  std::vector<long> count_;
  long k_ = 0;
  double sum_a_ = 0.0, sum_b_ = 0.0, sum_aa_ = 0.0, sum_bb_ = 0.0;
  double b_min_ = kInf, b_max_ = -kInf;
};

}  // namespace

void acip_orbit(const FlatUnimodalMap& map, std::uint64_t seed, long burn_in, long N, const PointSink& sink) {
  std::mt19937_64 rng(seed);
  ChartPoint x = map.from_plain(uniform_open01(rng));
  for (long k = 0; k < burn_in; ++k) x = map.eval(x);
  for (long k = 0; k < N; ++k) {
    sink(x);
    x = map.eval(x);
  }
}

OrbitSeries orbit_series(const FlatUnimodalMap& map, const Observable& phi, std::uint64_t seed, long burn_in,
                         long N) {
  if (N < 1) throw Error(ErrorKind::InvalidSpec, "orbit length must be >= 1");
  OrbitSeries s{seed, burn_in, N, {}, map.fingerprint()};
  s.values.reserve(static_cast<std::size_t>(N));
  acip_orbit(map, seed, burn_in, N, [&](ChartPoint x) { s.values.push_back(phi(map, x)); });
  return s;
}

int segment_count(long N) { return static_cast<int>(std::clamp<long>(N / 2'500'000, 1, 16)); }

std::vector<double> birkhoff_averages(const FlatUnimodalMap& map, const std::vector<Observable>& phis,
                                      std::uint64_t seed, long burn_in, long N) {
  if (N < 1) throw Error(ErrorKind::InvalidSpec, "orbit length must be >= 1");
  const auto segs = split(seed, N);
  std::vector<std::vector<double>> sums(segs.size(), std::vector<double>(phis.size(), 0.0));
  parallel_chunks(segs.size(), [&](std::size_t s) {
    acip_orbit(map, segs[s].seed, burn_in, segs[s].length, [&](ChartPoint x) {
      for (std::size_t i = 0; i < phis.size(); ++i) sums[s][i] += phis[i](map, x);
    });
  });
  std::vector<double> out(phis.size(), 0.0);
  for (const auto& seg : sums) {
    for (std::size_t i = 0; i < phis.size(); ++i) out[i] += seg[i];
  }
  for (double& v : out) v /= static_cast<double>(N);
  return out;
}

double birkhoff_average(const FlatUnimodalMap& map, const Observable& phi, std::uint64_t seed, long burn_in,
                        long N) {
  return birkhoff_averages(map, {phi}, seed, burn_in, N).front();
}

// ---------------------------------------------------------------------------
// Gibbs sampler

GibbsSampler::GibbsSampler(const TransferModel& model, double t, double p)
    : model_(model), t_(t), p_(p), spectral_(model.spectral(t, p)) {
  const InducingScheme& scheme = model.scheme();
  const double log_k = std::log(scheme.interval.K_tau);
  envelope_.resize(scheme.branches.size());
  double top = -kInf;
  for (std::size_t b = 0; b < scheme.branches.size(); ++b) {
    const Branch& br = scheme.branches[b];
    const double ld = t >= 0.0 ? br.log_df_min() - log_k : br.log_df_max() + log_k;
    envelope_[b] = -p * br.R - t * ld;
    top = std::max(top, envelope_[b]);
  }
  probs_.resize(envelope_.size());
  for (std::size_t b = 0; b < envelope_.size(); ++b) probs_[b] = std::exp(envelope_[b] - top);
  const double h_max = *std::max_element(spectral_.h.begin(), spectral_.h.end());
  log_h_max_ = std::log(1.1 * h_max);
}

GibbsSampler::Step GibbsSampler::draw(double x, std::mt19937_64& rng, std::discrete_distribution<int>& pick) const {
  const InducingScheme& scheme = model_.scheme();
  const double s = -std::log(x);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const int b = pick(rng);
    ++proposed_;
    const Branch& br = scheme.branches[b];
    const auto [u, log_d] = model_.excursion().inverse_branch(br.side, br.depth(), s);
    const double hy = model_.interpolate(spectral_.h, sign_of(br.side) * std::exp(-u));
    const double log_ratio = -p_ * br.R - t_ * log_d + std::log(std::max(hy, 0.0)) - envelope_[b] - log_h_max_;
    if (std::log(unif(rng)) < log_ratio) {
      ++accepted_;
      return {b, u};
    }
  }
  throw Error(ErrorKind::BudgetExceeded, "gibbs sampler: rejection budget exhausted");
}

void GibbsSampler::orbit(std::uint64_t seed, long burn_in, long N, const PointSink& sink) const {
  const InducingScheme& scheme = model_.scheme();
  const FlatUnimodalMap& map = *scheme.map;
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(probs_.begin(), probs_.end());
  constexpr int kWarm = 64;
  std::vector<Step> steps;
  double x = 0.5 * (scheme.interval.a_minus + scheme.interval.a_plus);
  long total = 0;
  for (int k = 0; total < burn_in + N; ++k) {
    const Step st = draw(x, rng, pick);
    const Branch& br = scheme.branches[st.branch];
    x = map.to_plain(map.normalize(ChartPoint::near_c(br.side, st.u)));
    if (k >= kWarm) {
      steps.push_back(st);
      total += br.R;
    }
  }
  long emitted = 0;
  for (auto it = steps.rbegin(); it != steps.rend() && emitted < burn_in + N; ++it) {
    const Branch& br = scheme.branches[it->branch];
    ChartPoint y = map.normalize(ChartPoint::near_c(br.side, it->u));
    for (int m = 0; m < br.R && emitted < burn_in + N; ++m) {
      if (emitted >= burn_in) sink(y);
      ++emitted;
      if (m + 1 < br.R) y = map.eval(y);
    }
  }
}

// ---------------------------------------------------------------------------
// Correlations

std::vector<int> correlation_lags(int n_max) {
  std::vector<int> lags;
  for (int n = 0; n <= std::min(n_max, 32); ++n) lags.push_back(n);
  for (double v = 32.0; v < n_max;) {
    v *= std::pow(10.0, 1.0 / 12.0);
    const int n = std::min(n_max, static_cast<int>(std::lround(v)));
    if (n > lags.back()) lags.push_back(n);
  }
  return lags;
}

CorrelationSeries correlation_series(const FlatUnimodalMap& map, const Observable& phi, const Observable& psi,
                                     int n_max, std::uint64_t seed, long N, const CorrelationSource& source,
                                     long burn_in) {
  if (n_max < 0) throw Error(ErrorKind::InvalidSpec, "n_max must be >= 0");
  if (!phi.bounded()) throw Error(ErrorKind::InvalidSpec, "correlation observable phi must be bounded");
  if (N <= n_max) throw Error(ErrorKind::InvalidSpec, "orbit length must exceed the largest lag");
  CorrelationSeries out;
  out.lags = correlation_lags(n_max);
  out.N = N;
  out.source = source.kind;

  std::unique_ptr<GibbsSampler> sampler;
  if (source.kind == CorrelationSourceKind::GibbsMeasure) {
    if (!source.model) throw Error(ErrorKind::InvalidSpec, "gibbs correlations need a transfer model");
    const PressureBracket P = source.model->solve_pressure(source.t, source.depth);
    out.t = source.t;
    out.p = P.mid();
    sampler = std::make_unique<GibbsSampler>(*source.model, source.t, out.p);
  }

  const auto segs = split(seed, N);
  std::vector<LagAccumulator> accs(segs.size(), LagAccumulator(out.lags));
  parallel_chunks(segs.size(), [&](std::size_t s) {
    auto sink = [&](ChartPoint x) { accs[s].push(phi(map, x), psi(map, x)); };
    if (sampler) {
      sampler->orbit(segs[s].seed, burn_in, segs[s].length, sink);
    } else {
      acip_orbit(map, segs[s].seed, burn_in, segs[s].length, sink);
    }
  });

  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, bmin = kInf, bmax = -kInf;
  std::vector<double> prod(out.lags.size(), 0.0);
  std::vector<long> cnt(out.lags.size(), 0);
  for (const auto& a : accs) {
    sa += a.sum_a_;
    sb += a.sum_b_;
    saa += a.sum_aa_;
    sbb += a.sum_bb_;
    bmin = std::min(bmin, a.b_min_);
    bmax = std::max(bmax, a.b_max_);
    for (std::size_t l = 0; l < prod.size(); ++l) {
      prod[l] += a.acc_[l];
      cnt[l] += a.count_[l];
    }
  }
  if (!(bmax > bmin)) throw Error(ErrorKind::DegenerateObservable, "psi is constant along the sampled orbit");
  const double n = static_cast<double>(N);
  out.mean_phi = sa / n;
  out.mean_psi = sb / n;
  out.var_phi = std::max(0.0, saa / n - out.mean_phi * out.mean_phi);
  out.var_psi = std::max(0.0, sbb / n - out.mean_psi * out.mean_psi);
  out.noise_floor = 2.0 * std::sqrt(out.var_phi * out.var_psi) / std::sqrt(n);
  out.cor.resize(out.lags.size());
  for (std::size_t l = 0; l < prod.size(); ++l) {
    out.cor[l] = cnt[l] ? prod[l] / static_cast<double>(cnt[l]) - out.mean_phi * out.mean_psi : kNaN;
  }
  return out;
}

std::string_view decay_model_name(DecayModel m) {
  switch (m) {
    case DecayModel::Exponential: return "exponential";
    case DecayModel::Stretched: return "stretched";
    case DecayModel::Polynomial: return "polynomial";
  }
  return "exponential";
}

DecayModel parse_decay_model(std::string_view name) {
  if (name == "exponential") return DecayModel::Exponential;
  if (name == "stretched") return DecayModel::Stretched;
  if (name == "polynomial") return DecayModel::Polynomial;
  throw Error(ErrorKind::ValidationError, "unknown decay model '" + std::string(name) + "'");
}

DecayFit decay_fit(const CorrelationSeries& series, const std::vector<DecayModel>& models, int n_min) {
  std::vector<double> n, y;
  double sign = 0.0;
  for (std::size_t l = 0; l < series.lags.size(); ++l) {
    if (series.lags[l] < std::max(1, n_min)) continue;
    const double c = std::abs(series.cor[l]);
    if (sign == 0.0) sign = series.cor[l] >= 0.0 ? 1.0 : -1.0;
    // A sign flip means the estimator bias has taken over.
    if (!(c > series.noise_floor) || series.cor[l] * sign < 0.0) break;
    n.push_back(series.lags[l]);
    y.push_back(std::log(c));
  }
  if (n.size() < 10) {
    throw Error(ErrorKind::InsufficientSignal,
                "only " + std::to_string(n.size()) + " correlation points above the noise floor");
  }
  DecayFit fit;
  fit.points = n.size();
  fit.n_lo = static_cast<int>(n.front());
  fit.n_hi = static_cast<int>(n.back());
  const double m = static_cast<double>(n.size());
  auto adjusted = [&](double r2, int k) { return 1.0 - (1.0 - r2) * (m - 1.0) / (m - k - 1.0); };
  for (DecayModel model : models) {
    DecayCandidate c;
    c.model = model;
    if (model == DecayModel::Exponential) {
      const LinearFit f = linear_fit(n, y);
      c.param = std::exp(f.slope);
      c.rate = f.slope;
      c.intercept = f.intercept;
      c.r2 = f.r2;
      c.adjusted_r2 = adjusted(f.r2, 1);
    } else if (model == DecayModel::Polynomial) {
      std::vector<double> ln(n.size());
      std::transform(n.begin(), n.end(), ln.begin(), [](double v) { return std::log(v); });
      const LinearFit f = linear_fit(ln, y);
      c.param = f.slope;
      c.rate = f.slope;
      c.intercept = f.intercept;
      c.r2 = f.r2;
      c.adjusted_r2 = adjusted(f.r2, 1);
    } else {
      c.r2 = -kInf;
      std::vector<double> z(n.size());
      for (int k = 1; k <= 19; ++k) {
        const double a = 0.05 * k;
        std::transform(n.begin(), n.end(), z.begin(), [a](double v) { return std::pow(v, a); });
        const LinearFit f = linear_fit(z, y);
        if (f.r2 > c.r2) {
          c.param = a;
          c.rate = f.slope;
          c.intercept = f.intercept;
          c.r2 = f.r2;
        }
      }
      c.adjusted_r2 = adjusted(c.r2, 2);
    }
    fit.candidates.push_back(c);
  }
  if (fit.candidates.empty()) throw Error(ErrorKind::InvalidSpec, "no decay models requested");
  fit.best = *std::max_element(fit.candidates.begin(), fit.candidates.end(),
                               [](const DecayCandidate& a, const DecayCandidate& b) {
                                 return a.adjusted_r2 < b.adjusted_r2;
                               });
  return fit;
}

// ---------------------------------------------------------------------------

TailSumReport tail_sum_bound_check(const InducingScheme& scheme, double v0) {
  const TailTable table = tail_statistics(scheme);
  TailSumReport rep;
  const double beta = v0 + 0.05;
  rep.window_lo = 1.0 - 1.0 / v0 - 0.3;
  rep.window_hi = 1.0 - 1.0 / beta + 0.3;
  // The partial sums stop at n_max, so the fit keeps a decade away from it.
  rep.n_lo = std::max(2, scheme.n_max / 100);
  rep.n_hi = std::max(rep.n_lo + 4, scheme.n_max / 10);
  std::vector<double> by_n(scheme.n_max + 1, kNaN);
  for (const TailRow& r : table.rows) by_n[r.n] = r.log_tail_sum;
  const double l0 = std::log(rep.n_lo), l1 = std::log(rep.n_hi);
  for (int k = 0; k <= 40; ++k) {
    const int n = static_cast<int>(std::lround(std::exp(l0 + (l1 - l0) * k / 40.0)));
    if (n > scheme.n_max || (!rep.n.empty() && n <= rep.n.back())) continue;
    if (!std::isfinite(by_n[n])) continue;
    rep.n.push_back(n);
    rep.log_tail_sum.push_back(by_n[n]);
  }
  std::vector<double> ln(rep.n.size()), nn(rep.n.size());
  for (std::size_t i = 0; i < rep.n.size(); ++i) {
    ln[i] = std::log(rep.n[i]);
    nn[i] = rep.n[i];
  }
  const LinearFit loglog = linear_fit(ln, rep.log_tail_sum);
  const LinearFit loglin = linear_fit(nn, rep.log_tail_sum);
  rep.slope = loglog.slope;
  rep.r2_loglog = loglog.r2;
  rep.r2_loglinear = loglin.r2;
  rep.polynomial = loglog.r2 >= loglin.r2;
  rep.in_window = rep.polynomial && rep.slope >= rep.window_lo && rep.slope <= rep.window_hi;
  return rep;
}

// ---------------------------------------------------------------------------

CltReport clt_test(const FlatUnimodalMap& map, const Observable& phi, long N, int samples, std::uint64_t seed,
                   long burn_in) {
  if (samples < 100) throw Error(ErrorKind::InvalidSpec, "clt_test needs at least 100 samples");
  if (N < 10) throw Error(ErrorKind::InvalidSpec, "clt_test needs segments of length >= 10");
  const int L = static_cast<int>(std::min<long>(200, N / 10));
  std::vector<double> sums(samples, 0.0);
  std::vector<std::vector<double>> lagged(samples, std::vector<double>(L + 1, 0.0));
  parallel_chunks(samples, [&](std::size_t s) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(N));
    acip_orbit(map, substream_seed(seed, s), burn_in, N, [&](ChartPoint x) { v.push_back(phi(map, x)); });
    sums[s] = std::accumulate(v.begin(), v.end(), 0.0);
    for (int n = 0; n <= L; ++n) {
      double acc = 0.0;
      for (long k = 0; k + n < N; ++k) acc += v[k] * v[k + n];
      lagged[s][n] = acc;
    }
  });
  CltReport rep;
  rep.N = N;
  rep.samples = samples;
  const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
  rep.mean = total / (static_cast<double>(N) * samples);
  std::vector<double> z(samples);
  for (int s = 0; s < samples; ++s) z[s] = (sums[s] - N * rep.mean) / std::sqrt(static_cast<double>(N));
  const double zbar = std::accumulate(z.begin(), z.end(), 0.0) / samples;
  double ss = 0.0;
  for (double v : z) ss += (v - zbar) * (v - zbar);
  rep.sigma2 = ss / (samples - 1);
  rep.sigma = std::sqrt(rep.sigma2);
  rep.coboundary = rep.sigma2 < 1e-3;
  if (rep.sigma > 0.0) {
    std::vector<double> std_z(samples);
    for (int s = 0; s < samples; ++s) std_z[s] = (z[s] - zbar) / rep.sigma;
    rep.ks_distance = ks_distance_normal(std::move(std_z));
  }
  // Green-Kubo: Var + 2 sum Cor(n), stopped at the noise floor.
  std::vector<double> C(L + 1, 0.0);
  for (int n = 0; n <= L; ++n) {
    double acc = 0.0;
    for (int s = 0; s < samples; ++s) acc += lagged[s][n];
    C[n] = acc / (static_cast<double>(samples) * (N - n)) - rep.mean * rep.mean;
  }
  const double floor = 2.0 * C[0] / std::sqrt(static_cast<double>(N) * samples);
  double gk = C[0];
  for (int n = 1; n <= L; ++n) {
    if (!(std::abs(C[n]) > floor)) break;
    gk += 2.0 * C[n];
  }
  rep.green_kubo_sigma2 = gk;
  rep.green_kubo_relative_diff = std::abs(gk - rep.sigma2) / std::max(rep.sigma2, 1e-300);
  return rep;
}

// ---------------------------------------------------------------------------

WeakLimitReport weak_limit_scan(const TransferModel& model, const std::vector<double>& t_grid,
                                const std::vector<Observable>& observables, int depth, const AcipSampling& acip) {
  if (t_grid.empty()) throw Error(ErrorKind::InvalidSpec, "empty t grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0 && t_grid[i] <= 1.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
      throw Error(ErrorKind::InvalidSpec, "weak-limit t grid must be ascending inside (0, 1]");
    }
  }
  const FlatUnimodalMap& map = *model.scheme().map;
  std::vector<Observable> all = observables;
  const std::vector<Observable> tents = parse_observables({"phi_4", "phi_8", "phi_16"});
  all.insert(all.end(), tents.begin(), tents.end());
  const std::vector<double> mu_ac = birkhoff_averages(map, all, acip.seed, acip.burn_in, acip.N);

  WeakLimitReport rep;
  for (double t : t_grid) {
    const EquilibriumReport eq = model.equilibrium_report(t, depth, all);
    double worst = 0.0;
    std::vector<double> tent;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const std::string name = all[i].name();
      const double mt = eq.observable_expectations.at(name);
      const double diff = std::abs(mt - mu_ac[i]);
      rep.rows.push_back({t, name, mt, mu_ac[i], diff});
      if (i < observables.size()) {
        worst = std::max(worst, diff);
      } else {
        tent.push_back(mt);
      }
    }
    rep.t.push_back(t);
    rep.max_discrepancy.push_back(worst);
    rep.tent_mass.push_back(std::move(tent));
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.max_discrepancy.size(); ++i) {
    if (rep.max_discrepancy[i] > rep.max_discrepancy[i - 1]) rep.monotone = false;
  }
  return rep;
}

}  // namespace flatcrit
