#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flatcrit/inducing.hpp"
#include "flatcrit/observables.hpp"
#include "flatcrit/thermo.hpp"

namespace flatcrit {

using PointSink = std::function<void(ChartPoint)>;

// Lebesgue-random start in (0,1), burn_in discarded iterates, then N points.
void acip_orbit(const FlatUnimodalMap& map, std::uint64_t seed, long burn_in, long N, const PointSink& sink);

struct OrbitSeries {
  std::uint64_t seed = 0;
  long burn_in = 0;
  long N = 0;
  std::vector<double> values;
  std::string map_fingerprint;
};

OrbitSeries orbit_series(const FlatUnimodalMap& map, const Observable& phi, std::uint64_t seed, long burn_in,
                         long N);

// Long runs are split into a fixed number of independent segments (substreams of
// `seed`), so the result does not depend on the worker count.
int segment_count(long N);
double birkhoff_average(const FlatUnimodalMap& map, const Observable& phi, std::uint64_t seed, long burn_in,
                        long N);
std::vector<double> birkhoff_averages(const FlatUnimodalMap& map, const std::vector<Observable>& phis,
                                      std::uint64_t seed, long burn_in, long N);

// Orbits typical for the equilibrium state mu_t: a backward chain of the induced
// map is drawn with the eigendata of the transfer model (rejection from a
// per-branch envelope), then replayed forward through the excursions.
class GibbsSampler {
 public:
  GibbsSampler(const TransferModel& model, double t, double p);

  void orbit(std::uint64_t seed, long burn_in, long N, const PointSink& sink) const;
  double t() const { return t_; }
  double p() const { return p_; }
  double acceptance_rate() const {
    const long n = proposed_.load();
    return n ? static_cast<double>(accepted_.load()) / n : 0.0;
  }

 private:
  struct Step {
    int branch;
    double u;
  };
  Step draw(double x, std::mt19937_64& rng, std::discrete_distribution<int>& pick) const;

  const TransferModel& model_;
  double t_ = 0.0, p_ = 0.0;
  TransferModel::Spectral spectral_;
  std::vector<double> envelope_;  // log q_b
  std::vector<double> probs_;
  double log_h_max_ = 0.0;
  mutable std::atomic<long> accepted_{0}, proposed_{0};
};

enum class CorrelationSourceKind { AcipTimeSeries, GibbsMeasure };

struct CorrelationSource {
  CorrelationSourceKind kind = CorrelationSourceKind::AcipTimeSeries;
  double t = 1.0;
  int depth = 8;
  const TransferModel* model = nullptr;  // required for GibbsMeasure
};

struct CorrelationSeries {
  std::vector<int> lags;
  std::vector<double> cor;
  double noise_floor = 0.0;  // 2 sd_phi sd_psi / sqrt(N)
  double var_phi = 0.0;
  double var_psi = 0.0;
  double mean_phi = 0.0;
  double mean_psi = 0.0;
  long N = 0;
  CorrelationSourceKind source = CorrelationSourceKind::AcipTimeSeries;
  double t = 0.0;
  double p = 0.0;
};

// Lags 0..32 and then about 12 per decade up to n_max.
std::vector<int> correlation_lags(int n_max);

CorrelationSeries correlation_series(const FlatUnimodalMap& map, const Observable& phi, const Observable& psi,
                                     int n_max, std::uint64_t seed, long N, const CorrelationSource& source,
                                     long burn_in = 1000);

enum class DecayModel { Exponential, Stretched, Polynomial };
std::string_view decay_model_name(DecayModel m);
DecayModel parse_decay_model(std::string_view name);

struct DecayCandidate {
  DecayModel model = DecayModel::Exponential;
  double param = kNaN;  // r, stretched exponent, or polynomial exponent
  double rate = kNaN;   // log-slope against n, n^param, or log n
  double intercept = kNaN;
  double r2 = kNaN;
  double adjusted_r2 = kNaN;
};

struct DecayFit {
  DecayCandidate best;
  std::vector<DecayCandidate> candidates;
  int n_lo = 0;
  int n_hi = 0;
  std::size_t points = 0;
};

inline const std::vector<DecayModel> kAllDecayModels = {DecayModel::Exponential, DecayModel::Stretched,
                                                        DecayModel::Polynomial};

// Fits on the initial run of lags n >= n_min whose |Cor(n)| stays above the noise
// floor without changing sign.
DecayFit decay_fit(const CorrelationSeries& series, const std::vector<DecayModel>& models = kAllDecayModels,
                   int n_min = 1);

struct TailSumReport {
  double slope = kNaN;
  double r2_loglog = kNaN;
  double r2_loglinear = kNaN;
  double window_lo = kNaN;
  double window_hi = kNaN;
  bool in_window = false;
  bool polynomial = false;
  int n_lo = 0;
  int n_hi = 0;
  std::vector<int> n;
  std::vector<double> log_tail_sum;
};

// Log-log slope of sum_{k=n}^{n_max} |{R > k}| against the window
// [1 - 1/v0 - 0.3, 1 - 1/(v0 + 0.05) + 0.3].
TailSumReport tail_sum_bound_check(const InducingScheme& scheme, double v0);

struct CltReport {
  double mean = 0.0;
  double sigma = 0.0;
  double sigma2 = 0.0;
  double ks_distance = kNaN;
  long N = 0;
  int samples = 0;
  bool coboundary = false;
  double green_kubo_sigma2 = kNaN;
  double green_kubo_relative_diff = kNaN;
};

CltReport clt_test(const FlatUnimodalMap& map, const Observable& phi, long N, int samples, std::uint64_t seed,
                   long burn_in = 1000);

struct WeakLimitRow {
  double t = 0.0;
  std::string observable;
  double mu_t = 0.0;
  double mu_ac = 0.0;
  double diff = 0.0;
};

struct WeakLimitReport {
  std::vector<WeakLimitRow> rows;
  std::vector<double> t;
  std::vector<double> max_discrepancy;  // over the Hoelder suite, per t
  std::vector<std::vector<double>> tent_mass;  // per t: phi_4, phi_8, phi_16 under mu_t
  bool monotone = false;
};

struct AcipSampling {
  std::uint64_t seed = 1;
  long burn_in = 1000;
  long N = 1'000'000;
};

WeakLimitReport weak_limit_scan(const TransferModel& model, const std::vector<double>& t_grid,
                                const std::vector<Observable>& observables, int depth,
                                const AcipSampling& acip = {});

}  // namespace flatcrit
