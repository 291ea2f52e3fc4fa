#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flatcrit/inducing.hpp"
#include "flatcrit/observables.hpp"

namespace flatcrit {

// Bounds for the branches beyond n_max: #S(n) <= c_gamma gamma^n and
// C1 e^{chi_inf R} <= |Df^R| <= C2 e^{chi_sup R}, all fitted on the enumerated part.
struct TruncationModel {
  int n_max = 0;
  double log_gamma = 0.0;
  double log_c_gamma = 0.0;
  double chi_inf = 0.0;
  double chi_sup = 0.0;
  double log_C1 = 0.0;
  double log_C2 = 0.0;

  // log of sum_{n > n_max} c_gamma gamma^n e^{-pn} (bound on |Df^n|^{-t}); +inf when divergent.
  double log_tail(double t, double p) const;
  // Same with an extra factor n (tail contribution to the return-time moment).
  double log_tail_moment(double t, double p) const;
};

TruncationModel truncation_model(const InducingScheme& scheme);

struct LevelSum {
  double value = 0.0;             // sampled per-branch sup/inf
  double upper = 0.0;             // per-branch bracket widened by K_tau
  double truncation_bound = 0.0;  // bound on the R > n_max part
};

// T(t,p) = sum_J e^{-pR(J)} sup_J |Df^R|^{-t}. Throws Divergent when the tail bound diverges.
LevelSum level_sum(const InducingScheme& scheme, double t, double p);

struct PressureBracket {
  double lo = 0.0;
  double hi = 0.0;
  double truncation_error = 0.0;
  double distortion_width = 0.0;
  int depth = 1;
  double t = 0.0;
  double p = 0.0;

  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct TransferOptions {
  int nodes = 32;  // even, so that no collocation node sits at c
  int max_iterations = 2000;
  double tolerance = 1e-14;
  // Root search range for P(t).
  double p_lo = -1.0;
  double p_hi = 1.3862943611198906 + 1.0;
};

struct GibbsCylinderMeasure {
  int depth = 1;
  double t = 0.0;
  double p = 0.0;
  double log_normalization = 0.0;
  std::vector<std::vector<int>> words;  // branch indices into scheme.branches
  std::vector<int> returns;             // R(word)
  std::vector<double> weights;          // normalized
  double log_C1 = 0.0;                  // observed min/max of weight / (e^{-n P - pR} |Df^n|^{-t})
  double log_C2 = 0.0;
  double alphabet_mass = 1.0;           // depth-1 mass of the alphabet used for deeper words
};

struct RefinementCheck {
  double min_log_ratio = 0.0;
  double max_log_ratio = 0.0;
  double bound = 0.0;  // |t| log K_tau
  bool pass = false;
};

struct EquilibriumReport {
  double t = 0.0;
  PressureBracket P;
  double chi = 0.0;
  double entropy = 0.0;
  double mean_return = 0.0;
  double kac_defect = 0.0;
  double identity_residual = 0.0;  // |h - t chi - P.mid|
  double tail_share = 0.0;          // truncation share of the return-time moment
  std::map<std::string, double> observable_expectations;
};

struct FreezeRow {
  double t = 0.0;
  PressureBracket P;
  enum class Sign { Positive, Negative, Inconclusive } sign = Sign::Inconclusive;
};

struct ChiTrendRow {
  int n = 0;
  double chi_inf = 0.0;
  double chi_sup = 0.0;
};

struct FreezeReport {
  std::vector<FreezeRow> rows;
  std::vector<ChiTrendRow> chi_trend;
  double t_plus = kNaN;  // largest grid t with P(t) > 0
  bool t_plus_found = false;
  double acim_integral = kNaN;  // integral of log|Df| over [0,1]
  bool acim_finite = false;
};

std::string_view sign_name(FreezeRow::Sign s);

// Transfer operator of the induced map, L g(x) = sum_J e^{-pR} |Df^R(y_J)|^{-t} g(y_J),
// discretized by collocation on Chebyshev-Lobatto nodes of I. Pressure brackets combine
// Collatz-Wielandt bounds for the computed eigenfunction with the L^n 1 distortion bound.
class TransferModel {
 public:
  explicit TransferModel(const InducingScheme& scheme, const TransferOptions& options = {});

  const InducingScheme& scheme() const { return scheme_; }
  const TruncationModel& truncation() const { return trunc_; }
  const Excursion& excursion() const { return ex_; }

  PressureBracket pressure_bracket(double t, double p, int depth) const;
  PressureBracket solve_pressure(double t, int depth) const;
  GibbsCylinderMeasure gibbs_cylinders(double t, double p, int depth, int alphabet = 48) const;
  RefinementCheck refinement_consistency(const GibbsCylinderMeasure& coarse,
                                         const GibbsCylinderMeasure& fine) const;
  EquilibriumReport equilibrium_report(double t, int depth, const std::vector<Observable>& observables) const;
  // Same, starting from an already solved bracket for P(t).
  EquilibriumReport equilibrium_at(const PressureBracket& P, const std::vector<Observable>& observables) const;
  FreezeReport freeze_scan(const std::vector<double>& t_grid, int depth) const;

  // Equilibrium-state ingredients at (t, p): eigenfunction on the nodes and the
  // lift weights omega(i, J) = nu_i W_J(x_i) h(y_J(x_i)) / lambda, normalized.
  struct Spectral {
    double t = 0.0, p = 0.0;
    double log_lambda = 0.0;
    std::vector<double> h;      // right eigenvector at the nodes (max 1)
    std::vector<double> nu;     // left eigenvector (sum nu h = 1)
    std::vector<double> omega;  // [node][side][j] flattened
  };
  Spectral spectral(double t, double p) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  double node(int i) const { return nodes_[i]; }
  int depth_count() const { return J_ + 1; }
  std::size_t omega_index(int i, int side, int j) const {
    return (static_cast<std::size_t>(i) * 2 + side) * (J_ + 1) + j;
  }
  // Preimage data of node i through branch (side, j).
  double preimage_u(int i, int side, int j) const { return node_data_[i].u[side][j]; }
  double preimage_log_df(int i, int side, int j) const { return node_data_[i].log_d[side][j]; }
  // s = -log z_{i,m}: the m-th g-preimage of node i (m = 0 is the node).
  double chain_s(int i, int m) const { return node_chain_[i][m]; }

  // Polynomial interpolant of nodal values at c + delta (barycentric form).
  double interpolate(const std::vector<double>& values, double delta) const;

 private:
  struct PointData {
    double x = 0.0;
    std::vector<double> u[2];
    std::vector<double> log_d[2];
  };
  struct Operator {
    double shift = 0.0;
    std::vector<double> A;  // n x n, row-major, scaled by e^{-shift}
  };

  PointData make_point(double x, std::vector<double>* chain) const;
  Operator build(double t, double p) const;
  double log_apply_at(const PointData& pt, const std::vector<double>& g, double t, double p) const;
  std::vector<double> power(const Operator& op, bool transpose, double& log_rho) const;

  InducingScheme scheme_;
  Excursion ex_;
  TransferOptions options_;
  TruncationModel trunc_;
  int J_ = 0;
  std::vector<double> nodes_;
  std::vector<double> bary_;
  std::vector<double> node_offset_;  // c - x_k
  std::vector<PointData> node_data_;
  std::vector<PointData> check_data_;
  std::vector<std::vector<double>> node_chain_;
};

// Convenience wrappers building a TransferModel on the fly.
PressureBracket pressure_bracket(const InducingScheme& scheme, double t, double p, int depth);
PressureBracket solve_pressure(const InducingScheme& scheme, double t, int depth);
GibbsCylinderMeasure gibbs_cylinders(const InducingScheme& scheme, double t, double p, int depth);
EquilibriumReport equilibrium_report(const InducingScheme& scheme, double t, int depth,
                                     const std::vector<Observable>& observables);
FreezeReport freeze_scan(const InducingScheme& scheme, const std::vector<double>& t_grid, int depth);

// Integral of log|Df| over [0,1], with the window done in log coordinates.
double acim_log_df_integral(const FlatUnimodalMap& map);

}  // namespace flatcrit
