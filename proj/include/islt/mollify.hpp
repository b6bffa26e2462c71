#pragma once

#include <array>
#include <string>
#include <vector>

#include "islt/geometry.hpp"
#include "islt/simulate.hpp"

namespace islt {

enum class MollifierProfile { bump, tensor_cosine };

struct MollifierSpec {
  double eps = 0.1;
  MollifierProfile profile = MollifierProfile::bump;
};

std::string profile_name(MollifierProfile p);
MollifierProfile parse_profile(const std::string& s);

// Normalizing constant c of c·exp(-1/(1-|x|²)) in d dimensions.
double bump_constant(int d);
// Continuum φ_ε at displacement x.
double mollifier_value(const MollifierSpec& spec, int d, const std::array<double, 3>& x);

// Offsets and density values of the sampled kernel, renormalized so Σ w · cell volume = 1.
struct KernelStencil {
  std::vector<std::array<int, 3>> offsets;
  std::vector<double> weights;
};

void check_resolvable(const MollifierSpec& spec, const Grid& grid);
// Node-to-node stencil (displacement offset·h).
KernelStencil node_stencil(const MollifierSpec& spec, const Grid& grid);
// Cell-center-to-node stencil: node = cell + offset, displacement (offset - 1/2)·h.
KernelStencil cell_stencil(const MollifierSpec& spec, const Grid& grid);

// φ_ε centered at the node nearest the domain center.
GridField bump_kernel(const MollifierSpec& spec, const GridPtr& grid);

struct SmoothedDensity {
  GridField field;
  double boundary_loss = 0.0;   // mass whose kernel fell outside the closed box
};

SmoothedDensity smooth_occupation(const GridMeasure& occ, const MollifierSpec& spec, int workers = 1);
SmoothedDensity smooth_occupation(const SparseOccupation& occ, const GridPtr& grid,
                                  const MollifierSpec& spec, int workers = 1);
// Serial node-by-node gather; kept as the reference for the banded scatter above.
SmoothedDensity smooth_occupation_reference(const GridMeasure& occ, const MollifierSpec& spec);
// Per-cell weights a_c with <smooth(m), f> = Σ_c m_c a_c.
std::vector<double> smoothing_adjoint(const GridField& f, const MollifierSpec& spec);

// (φ_ε ⋆ g)(y) = Σ_z w_z g(z) φ_ε(y - z) for a node density g.
GridField convolve_density(const GridField& g, const MollifierSpec& spec);

GridField intersection_density(const std::vector<GridField>& fields);
double test_integral(const GridField& density, const GridField& f);

}  // namespace islt
