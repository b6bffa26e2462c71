#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "islt/geometry.hpp"
#include "islt/mollify.hpp"

namespace islt {

// Value of a rate functional, with +∞ carried as a sentinel plus its reason.
// Arithmetic saturates at +∞; +∞ orders above every finite value.
class RateValue {
public:
  RateValue() = default;
  static RateValue finite(double v);
  static RateValue infinity(std::string reason);

  bool is_finite() const { return !infinite_; }
  double value() const;   // +inf when infinite
  const std::string& reason() const { return reason_; }

  friend RateValue operator+(const RateValue& a, const RateValue& b);
  friend RateValue operator*(double s, const RateValue& a);
  friend bool operator<(const RateValue& a, const RateValue& b);
  friend bool operator==(const RateValue& a, const RateValue& b);

private:
  double v_ = 0.0;
  bool infinite_ = false;
  std::string reason_;
};

struct DensityDecomposition {
  std::vector<GridField> fields;
  std::vector<double> weights;

  int p() const { return static_cast<int>(fields.size()); }
};

struct RateResult {
  RateValue value;
  DensityDecomposition minimizer;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  int restart_index = 0;               // -1: symmetric start, -2 - j: caller candidate j
  double max_pairwise_distance = 0.0;  // max ||phi_i - phi_j||_2 of the returned tuple
};

enum class FlowMetric { sobolev, l2 };

struct FlowOptions {
  int max_iter = 4000;
  double rel_tol = 1e-6;
  int restarts = 3;
  std::uint64_t seed = 1;
  FlowMetric metric = FlowMetric::sobolev;
  double eta0 = 0.0;      // 0 selects the metric default (0.1 h² for l2, 1 for sobolev)
  double noise = 1e-3;    // relative amplitude of the seeded initial perturbation
};

// Smooth H¹₀ random field: a seeded combination of low sine modes.
GridField random_smooth_field(const GridPtr& grid, std::uint64_t seed, int modes = 4);

// ----- Donsker-Varadhan ------------------------------------------------------
// Boundary criterion: mean density on boundary-touching cells above this fraction of the
// overall mean marks the square root as outside H¹₀.
constexpr double kBoundaryMassThreshold = 0.25;

RateValue dv_rate(const GridMeasure& mu);
RateValue dv_rate_density(const GridField& g);
RateResult minimize_dv(const GridPtr& grid, const FlowOptions& opts = {}, const GridField* init = nullptr);

// Rayleigh quotient R(ψ) = ½ D(ψ)/||ψ||² and its L² gradient.
double rayleigh_value(const GridField& psi);
GridField rayleigh_gradient(const GridField& psi);

// ----- Θ_B(U) and χ_B --------------------------------------------------------
RateResult theta(const GridPtr& grid, const CompactSubset& U, int p, const FlowOptions& opts = {});
// Scale-invariant quotient (p/2) D(φ) / ||1_U φ||²_{2p} and its L² gradient.
double theta_quotient(const GridField& phi, const std::vector<unsigned char>& mask, int p);
GridField theta_gradient(const GridField& phi, const std::vector<unsigned char>& mask, int p);

RateResult chi_B(const GridPtr& grid, int p, const FlowOptions& opts = {});
double chi_energy(const GridField& psi, int p);
GridField chi_gradient(const GridField& psi, int p);

// ----- I and J over product decompositions -----------------------------------
struct DecompositionProblem {
  GridField g;                 // target density
  std::vector<double> b;       // weights
  bool normalized = true;      // true: I (unit factors), false: J
};

// Objective in the log-parameterization ψ_i² = g^{1/p} e^{u_i}, Σ u_i = 0.
double decomposition_objective(const DecompositionProblem& prob, const std::vector<GridField>& u);
std::vector<GridField> decomposition_gradient(const DecompositionProblem& prob, const std::vector<GridField>& u);
DensityDecomposition decomposition_fields(const DecompositionProblem& prob, const std::vector<GridField>& u);

RateResult rate_I(const GridField& g, const std::vector<double>& b, int p, const FlowOptions& opts = {},
                  const std::vector<DensityDecomposition>& candidates = {});
RateResult rate_I(const GridMeasure& mu, const std::vector<double>& b, int p, const FlowOptions& opts = {},
                  const std::vector<DensityDecomposition>& candidates = {});

RateResult rate_J(const GridField& g, const CompactSubset& U, int p, const FlowOptions& opts = {},
                  const std::vector<DensityDecomposition>& candidates = {});
RateResult rate_J(const GridMeasure& mu, const CompactSubset& U, int p, const FlowOptions& opts = {},
                  const std::vector<DensityDecomposition>& candidates = {});

// Direct evaluation given all densities; tol is the compatibility tolerance (relative, max-norm).
RateValue rate_I_full(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b,
                      double tol);
RateValue rate_I_full(const GridMeasure& mu, const std::vector<GridMeasure>& mus, const std::vector<double>& b,
                      double tol);

struct EpsRate {
  RateValue value;
  std::vector<GridField> psi;   // recovered or supplied inner fields
  double residual = 0.0;        // worst forward-verification residual
  std::string diagnostic;
};

constexpr double kTikhonov = 1e-6;

// Inner ψ_i either supplied (forward-verified) or recovered by Tikhonov-regularized deconvolution.
EpsRate rate_I_eps(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b,
                   const MollifierSpec& spec, double tol, const std::vector<GridField>* candidate = nullptr);
EpsRate rate_I_eps(const GridMeasure& mu, const std::vector<GridMeasure>& mus, const std::vector<double>& b,
                   const MollifierSpec& spec, double tol, const std::vector<GridField>* candidate = nullptr);
// Solves (C² + αI) x = C g for the node convolution C.
GridField tikhonov_deconvolve(const GridField& g, const MollifierSpec& spec, double alpha = kTikhonov);

struct GammaRow {
  double eps = 0.0;
  double delta = 0.0;
  RateValue inf_value;
  int members_in_ball = 0;
};

// Weak distance between tuples: weighted sum over low sine modes and the constant.
double weak_distance(const std::vector<GridField>& a, const std::vector<GridField>& b);

// Upper-bound study of the Γ-limit: for each (ε, δ), the least I_ε over forward-smoothed
// members of a fixed perturbation family lying within weak distance δ of the target tuple.
std::vector<GammaRow> gamma_probe(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b,
                                  const std::vector<double>& eps_list, const std::vector<double>& delta_list,
                                  std::uint64_t seed = 1, MollifierProfile profile = MollifierProfile::bump);

// ----- tilted supremum ---------------------------------------------------------
struct TiltedResult {
  double value = 0.0;
  std::vector<GridField> fields;
  int sweeps = 0;
  int best_start = 0;
};

double tilted_objective(const GridField& f, const std::vector<GridField>& fi, const std::vector<GridField>& psi);
TiltedResult tilted_sup(const GridField& f, const std::vector<GridField>& fi, int starts = 5, std::uint64_t seed = 1);

}  // namespace islt
