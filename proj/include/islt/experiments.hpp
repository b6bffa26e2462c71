#pragma once

#include <string>
#include <utility>
#include <vector>

#include "islt/config.hpp"

namespace islt {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(const std::string& path) const;
};

struct ExperimentReport {
  std::string name;
  Table table;
  std::vector<std::pair<std::string, double>> summary;   // ordered key/value results
  std::vector<std::string> notes;                        // advisories, starvation, caps
  bool passed = true;

  double get(const std::string& key) const;              // throws when absent
};

// Survival probability S_t(x) of the discrete killed semigroup, used to cap t ladders.
double survival_estimate(const GridPtr& grid, const Point& x, double t);
constexpr double kMinAcceptance = 1e-3;

// (1/t) log E[exp(∫₀ᵗ f(W_s) ds); t < τ] on the capped ladder, a weighted fit Λ + b/t, and the
// spectral principal eigenvalue of ½Δ + f on the same grid. One report per catalog entry; all
// entries are evaluated on the same sample paths.
std::vector<ExperimentReport> gartner_ellis_p1(const ExperimentConfig& cfg, int workers = 0);

// Concentration of normalized smoothed occupation densities around ψ₁² under survival conditioning.
ExperimentReport ldp_tuple_probe(const ExperimentConfig& cfg, int workers = 0);

// Builds b_i = ||φ*||², ψ_i = φ*/||φ*|| from theta's minimizer and checks both conditions.
ExperimentReport heuristic_audit(const GridPtr& grid, const CompactSubset& U, int p, const FlowOptions& opts = {},
                                 double noise = 0.01, std::uint64_t seed = 7);

struct ScalingOptions {
  double s = 0.05;            // base horizon; the second run uses 2s
  double eps_scale = 0.5;     // ε = eps_scale · √horizon keeps the smoothed functional scale-covariant
  double half_width = 1.5;    // box [-w, w]^d standing in for the whole space
  int n = 128;
  double dt_fraction = 1e-3;  // dt = dt_fraction · horizon
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  MollifierProfile profile = MollifierProfile::bump;
};
// First moment of the smoothed intersection mass at horizons s and 2s (and an independent s rerun).
ExperimentReport scaling_check_isl_mass(int p, int d, const ScalingOptions& opts, int workers = 0);

// Median over accepted pairs of |<ℓ_ε - ℓ_{ε/2}, f>| per ε and test function (p motions,
// pairs drawn as independent survivors per motion).
ExperimentReport eps_contraction(const ExperimentConfig& cfg, int workers = 0);

// Exact vs Monte Carlo smoothed moments (k = 1, and k = 2 when max_k >= 2): exact, error, MC, SE, z.
ExperimentReport moment_comparison(const ExperimentConfig& cfg, int max_k, int workers = 0);

// Dispatch on cfg.experiment: gartner_ellis, ldp_tuple, heuristic_audit, scaling, eps_contraction, moments.
std::vector<ExperimentReport> run_experiment(const ExperimentConfig& cfg, int workers = 0);

}  // namespace islt
