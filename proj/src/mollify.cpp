#include "islt/mollify.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "islt/errors.hpp"

namespace islt {

std::string profile_name(MollifierProfile p) {
  return p == MollifierProfile::bump ? "bump" : "tensor_cosine";
}

MollifierProfile parse_profile(const std::string& s) {
  if (s == "bump") return MollifierProfile::bump;
  if (s == "tensor_cosine") return MollifierProfile::tensor_cosine;
  throw ValidationError("unknown mollifier profile: " + s);
}

double bump_constant(int d) {
  require(d == 2 || d == 3, "bump_constant: d must be 2 or 3");
  auto radial = [d](double r) {
    if (r >= 1.0) return 0.0;
    return std::pow(r, d - 1) * std::exp(-1.0 / (1.0 - r * r));
  };
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(radial, 0.0, 1.0, 15, 1e-14);
  const double sphere = d == 2 ? 2.0 * M_PI : 4.0 * M_PI;
  return 1.0 / (sphere * I);
}

double mollifier_value(const MollifierSpec& spec, int d, const std::array<double, 3>& x) {
  const double e = spec.eps;
  if (spec.profile == MollifierProfile::bump) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += (x[a] / e) * (x[a] / e);
    if (r2 >= 1.0) return 0.0;
    static const double c2 = bump_constant(2), c3 = bump_constant(3);
    return (d == 2 ? c2 : c3) * std::exp(-1.0 / (1.0 - r2)) / std::pow(e, d);
  }
  double v = 1.0;
  for (int a = 0; a < d; ++a) {
    const double u = x[a] / e;
    if (std::abs(u) >= 1.0) return 0.0;
    v *= 0.5 * (1.0 + std::cos(M_PI * u)) / e;
  }
  return v;
}

void check_resolvable(const MollifierSpec& spec, const Grid& grid) {
  require(spec.eps > 0.0 && std::isfinite(spec.eps), "mollifier width must be positive");
  require(spec.eps >= 2.0 * grid.max_h() * (1.0 - 1e-12),
          "mollifier width below 2h is not resolvable on this grid");
}

namespace {

KernelStencil build_stencil(const MollifierSpec& spec, const Grid& grid, double shift) {
  check_resolvable(spec, grid);
  const int d = grid.dim();
  KernelStencil st;
  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    const int r = static_cast<int>(std::ceil(spec.eps / grid.h(a))) + 1;
    lo[a] = -r;
    hi[a] = r;
  }
  double total = 0.0;
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const std::array<int, 3> o{i, j, k};
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = 0; a < d; ++a) x[a] = (o[a] - shift) * grid.h(a);
        const double v = mollifier_value(spec, d, x);
        if (v <= 0.0) continue;
        st.offsets.push_back(o);
        st.weights.push_back(v);
        total += v * grid.cell_volume();
      }
  for (double& w : st.weights) w /= total;
  return st;
}

}  // namespace

KernelStencil node_stencil(const MollifierSpec& spec, const Grid& grid) { return build_stencil(spec, grid, 0.0); }

KernelStencil cell_stencil(const MollifierSpec& spec, const Grid& grid) { return build_stencil(spec, grid, 0.5); }

GridField bump_kernel(const MollifierSpec& spec, const GridPtr& grid) {
  const Grid& g = *grid;
  const KernelStencil st = node_stencil(spec, g);
  const Point c = g.domain().center();
  std::array<int, 3> mc{0, 0, 0};
  for (int a = 0; a < g.dim(); ++a)
    mc[a] = static_cast<int>(std::lround((c[a] - g.domain().lower[a]) / g.h(a)));
  GridField out(grid);
  for (std::size_t q = 0; q < st.offsets.size(); ++q) {
    std::array<int, 3> mi{0, 0, 0};
    bool inside = true;
    for (int a = 0; a < g.dim(); ++a) {
      mi[a] = mc[a] + st.offsets[q][a];
      if (mi[a] < 0 || mi[a] > g.n()) inside = false;
    }
    if (inside) out.values[g.node_index(mi[0], mi[1], mi[2])] = st.weights[q];
  }
  return out;
}

namespace {

struct CellList {
  std::vector<std::size_t> cells;
  std::vector<double> masses;
};

SmoothedDensity scatter(const CellList& src, const GridPtr& grid, const MollifierSpec& spec, int workers) {
  const Grid& g = *grid;
  const KernelStencil st = cell_stencil(spec, g);
  const int d = g.dim();
  const int slow = d - 1;
  const int n = g.n();
  SmoothedDensity out{GridField(grid), 0.0};
  double* field = out.field.values.data();

  // Bands over the slowest node axis: each node receives contributions in (cell, tap) order
  // regardless of the number of bands, so results do not depend on the worker count.
  // Taps are generated slow-axis-major, so each slow offset owns a contiguous tap range.
  const int smin = st.offsets.front()[slow], smax = st.offsets.back()[slow];
  std::vector<std::size_t> first(smax - smin + 2, st.offsets.size());
  for (std::size_t t = st.offsets.size(); t-- > 0;) first[st.offsets[t][slow] - smin] = t;
  for (int o = smax - smin; o >= 0; --o) first[o] = std::min(first[o], first[o + 1]);

  const int nbands = std::max(1, std::min(workers, n + 1));
#pragma omp parallel for num_threads(nbands) schedule(static, 1)
  for (int band = 0; band < nbands; ++band) {
    const int b0 = static_cast<int>((static_cast<long long>(n + 1) * band) / nbands);
    const int b1 = static_cast<int>((static_cast<long long>(n + 1) * (band + 1)) / nbands);
    for (std::size_t q = 0; q < src.cells.size(); ++q) {
      const auto ci = g.cell_multi(src.cells[q]);
      const int o0 = std::max(smin, b0 - ci[slow]), o1 = std::min(smax, b1 - 1 - ci[slow]);
      if (o0 > o1) continue;
      const double m = src.masses[q];
      for (std::size_t t = first[o0 - smin]; t < first[o1 - smin + 1]; ++t) {
        std::array<int, 3> mi{0, 0, 0};
        bool inside = true;
        for (int a = 0; a < d; ++a) {
          mi[a] = ci[a] + st.offsets[t][a];
          if (mi[a] < 0 || mi[a] > n) inside = false;
        }
        if (!inside) continue;
        field[g.node_index(mi[0], mi[1], mi[2])] += m * st.weights[t];
      }
    }
  }

  // Retained fraction per cell under trapezoid integration.
  std::array<int, 3> omin{0, 0, 0}, omax{0, 0, 0};
  for (const auto& o : st.offsets)
    for (int a = 0; a < d; ++a) {
      omin[a] = std::min(omin[a], o[a]);
      omax[a] = std::max(omax[a], o[a]);
    }
  double loss = 0.0;
  for (std::size_t q = 0; q < src.cells.size(); ++q) {
    const auto ci = g.cell_multi(src.cells[q]);
    bool interior = true;
    for (int a = 0; a < d; ++a)
      if (ci[a] + omin[a] < 1 || ci[a] + omax[a] > n - 1) interior = false;
    if (interior) continue;
    double kept = 0.0;
    for (std::size_t t = 0; t < st.offsets.size(); ++t) {
      std::array<int, 3> mi{0, 0, 0};
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        mi[a] = ci[a] + st.offsets[t][a];
        if (mi[a] < 0 || mi[a] > n) inside = false;
      }
      if (inside) kept += st.weights[t] * g.node_weight(g.node_index(mi[0], mi[1], mi[2]));
    }
    loss += src.masses[q] * (1.0 - kept);
  }
  out.boundary_loss = loss;
  return out;
}

}  // namespace

SmoothedDensity smooth_occupation(const GridMeasure& occ, const MollifierSpec& spec, int workers) {
  CellList src;
  for (std::size_t c = 0; c < occ.masses.size(); ++c) {
    require(occ.masses[c] >= 0.0, "smooth_occupation: negative cell mass");
    if (occ.masses[c] != 0.0) {
      src.cells.push_back(c);
      src.masses.push_back(occ.masses[c]);
    }
  }
  return scatter(src, occ.grid, spec, workers);
}

SmoothedDensity smooth_occupation(const SparseOccupation& occ, const GridPtr& grid, const MollifierSpec& spec,
                                  int workers) {
  CellList src;
  src.cells.assign(occ.cells.begin(), occ.cells.end());
  src.masses = occ.masses;
  for (std::size_t c : src.cells) require(c < grid->num_cells(), "occupation cell outside the grid");
  return scatter(src, grid, spec, workers);
}

SmoothedDensity smooth_occupation_reference(const GridMeasure& occ, const MollifierSpec& spec) {
  const Grid& g = *occ.grid;
  const KernelStencil st = cell_stencil(spec, g);
  const int d = g.dim();
  SmoothedDensity out{GridField(occ.grid), 0.0};
  for (std::size_t y = 0; y < g.num_nodes(); ++y) {
    const auto mi = g.node_multi(y);
    double v = 0.0;
    for (std::size_t t = 0; t < st.offsets.size(); ++t) {
      std::array<int, 3> ci{0, 0, 0};
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        ci[a] = mi[a] - st.offsets[t][a];
        if (ci[a] < 0 || ci[a] >= g.n()) inside = false;
      }
      if (inside) v += occ.masses[g.cell_index(ci[0], ci[1], ci[2])] * st.weights[t];
    }
    out.field.values[y] = v;
  }
  out.boundary_loss = occ.total() - integrate(out.field);
  return out;
}

std::vector<double> smoothing_adjoint(const GridField& f, const MollifierSpec& spec) {
  const Grid& g = *f.grid;
  const KernelStencil st = cell_stencil(spec, g);
  const int d = g.dim();
  std::vector<double> a(g.num_cells(), 0.0);
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto ci = g.cell_multi(c);
    double s = 0.0;
    for (std::size_t t = 0; t < st.offsets.size(); ++t) {
      std::array<int, 3> mi{0, 0, 0};
      bool inside = true;
      for (int q = 0; q < d; ++q) {
        mi[q] = ci[q] + st.offsets[t][q];
        if (mi[q] < 0 || mi[q] > g.n()) inside = false;
      }
      if (!inside) continue;
      const std::size_t y = g.node_index(mi[0], mi[1], mi[2]);
      s += st.weights[t] * g.node_weight(y) * f.values[y];
    }
    a[c] = s;
  }
  return a;
}

GridField convolve_density(const GridField& src, const MollifierSpec& spec) {
  const Grid& g = *src.grid;
  const KernelStencil st = node_stencil(spec, g);
  const int d = g.dim();
  GridField out(src.grid);
  for (std::size_t y = 0; y < g.num_nodes(); ++y) {
    const auto mi = g.node_multi(y);
    double v = 0.0;
    for (std::size_t t = 0; t < st.offsets.size(); ++t) {
      std::array<int, 3> zi{0, 0, 0};
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        zi[a] = mi[a] - st.offsets[t][a];
        if (zi[a] < 0 || zi[a] > g.n()) inside = false;
      }
      if (!inside) continue;
      const std::size_t z = g.node_index(zi[0], zi[1], zi[2]);
      v += st.weights[t] * g.node_weight(z) * src.values[z];
    }
    out.values[y] = v;
  }
  return out;
}

GridField intersection_density(const std::vector<GridField>& fields) {
  require(!fields.empty(), "intersection_density: no fields");
  for (const auto& f : fields) check_same_grid(*fields.front().grid, *f.grid);
  GridField out(fields.front().grid);
  const std::size_t p = fields.size();
  std::vector<double> vals(p);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < p; ++k) vals[k] = fields[k].values[i];
    std::sort(vals.begin(), vals.end());
    double v = 1.0;
    for (double x : vals) v *= x;
    out.values[i] = v;
  }
  return out;
}

double test_integral(const GridField& density, const GridField& f) { return l2_inner(density, f); }

}  // namespace islt
