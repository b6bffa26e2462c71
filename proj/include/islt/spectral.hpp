#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "islt/geometry.hpp"

namespace islt {

struct SpectralBasis {
  GridPtr grid;
  std::vector<double> eigenvalues;          // ascending
  Eigen::MatrixXd fields;                   // num_nodes x N, column n is psi_n
  std::vector<std::array<int, 3>> modes;    // separable mode indices, 1-based
  double sup_norm = 0.0;                    // max_n ||psi_n||_inf

  int count() const { return static_cast<int>(eigenvalues.size()); }
  GridField field(int n) const;
  // psi_n(x) for all n, by multilinear interpolation.
  Eigen::VectorXd values_at(const Point& x) const;
};

struct SeriesValue {
  double value = 0.0;
  double tail = 0.0;      // truncation estimate
  bool warning = false;   // tail above 1% of |value|
};

int default_mode_count(const Grid& grid);

SpectralBasis dirichlet_eigs(const GridPtr& grid, int count);

SeriesValue transition_density(const SpectralBasis& basis, double s, const Point& x, const Point& y);
SeriesValue green_function(const SpectralBasis& basis, const Point& x, const Point& y);
SeriesValue truncated_green(const SpectralBasis& basis, double delta, const Point& x, const Point& y);
// Complement sum Σ e^{-δλ}/λ ψψ, so truncated + complement = green.
SeriesValue green_complement(const SpectralBasis& basis, double delta, const Point& x, const Point& y);

// Least-squares slope of log λ_n against log n for n in [first, last], 1-based.
double weyl_slope(const SpectralBasis& basis, int first, int last);
double weyl_slope(const std::vector<double>& eigenvalues, int first, int last);

struct PrincipalPair {
  double value = 0.0;   // largest eigenvalue of 1/2 Δ_h + f
  GridField field;      // L²-normalized, nonnegative
  int iterations = 0;
};

PrincipalPair schroedinger_ground_state(const GridPtr& grid, const GridField& f);
double schroedinger_principal(const GridPtr& grid, const GridField& f);

// Binary cache keyed by (domain, n, N).
std::uint64_t basis_hash(const Grid& grid, int count);
void save_basis(const std::string& path, const SpectralBasis& basis);
std::optional<SpectralBasis> load_basis(const std::string& path, const GridPtr& grid, int count);
// Loads from cache_dir when present and valid, otherwise computes and stores.
SpectralBasis cached_dirichlet_eigs(const std::string& cache_dir, const GridPtr& grid, int count,
                                    bool* cache_hit = nullptr);

}  // namespace islt
