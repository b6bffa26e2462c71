#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "islt/geometry.hpp"
#include "islt/mollify.hpp"
#include "islt/simulate.hpp"

namespace islt {

// One exact smoothed-moment evaluation. f lives on the occupation grid (the grid the
// Monte Carlo side deposits cell occupation on); starts has one point per motion.
struct MomentProblem {
  GridField f;
  double t = 0.5;
  MollifierSpec spec;
  std::vector<Point> starts;
  // Resolution of the semigroup grid for k = 1 (a multiple of f's n; 0 selects f's n).
  int fine_n = 0;
};

struct MomentValue {
  double value = 0.0;
  double error = 0.0;           // quadrature error estimate (absolute)
  std::vector<std::string> warnings;
};

// E_x[occupation density at z; t < τ] = ∫₀ᵗ p_r(x, z) S_{t-r}(z) dr by adaptive vector quadrature.
struct OccupationDensity {
  GridField density;
  double error = 0.0;           // weighted L¹ error estimate
  int panels = 0;
};
OccupationDensity expected_occupation(const GridPtr& grid, const Point& x, double t, double rel_tol = 1e-10);

// Smoothed expected occupation field per motion, on f's grid.
GridField expected_smoothed_occupation(const MomentProblem& prob, const Point& x, double rel_tol,
                                       double* error = nullptr);

MomentValue exact_moment_k1(const MomentProblem& prob, double rel_tol = 1e-10);

// Above this many interior nodes the dense two-point kernel is refused.
constexpr std::size_t kK2MaxNodes = 9000;
constexpr int kK2WarnN = 64;
MomentValue exact_moment_k2(const MomentProblem& prob);

// Two-point kernel E_x[ℓ(dz1) ℓ(dz2); t < τ] / (dz1 dz2) on interior nodes, both orderings summed.
Eigen::MatrixXd occupation_pair_density(const GridPtr& grid, const Point& x, double t, int rule_points = 8);

struct McMoment {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t accepted = 0;
  std::size_t sampled = 0;
};

// ⟨f, ∏ᵢ smoothed ℓᵢ⟩ for one path; 0 when any motion was killed.
double smoothed_intersection_value(const PathResult& path, const GridField& f, const MollifierSpec& spec);

// Mean and jackknife standard error of X^k over all sampled paths (rejected paths count as 0).
McMoment mc_moment(int k, const std::vector<double>& values, std::size_t accepted);
McMoment mc_moment(int k, const GridField& f, const MollifierSpec& spec, const Ensemble& ensemble);
// Streaming form: samples n paths with run_ensemble, never storing occupations.
McMoment mc_moment(int k, const GridField& f, const MollifierSpec& spec, const DomainSpec& domain,
                   const PathConfig& cfg, std::size_t n_samples, int workers = 0);

// Per-sample X for n paths (0 for killed paths), in sample order.
std::vector<double> mc_sample_values(const GridField& f, const MollifierSpec& spec, const DomainSpec& domain,
                                     const PathConfig& cfg, std::size_t n_samples, int workers = 0,
                                     std::size_t* accepted = nullptr);

}  // namespace islt
