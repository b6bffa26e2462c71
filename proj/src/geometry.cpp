#include "islt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "islt/errors.hpp"

namespace islt {

DomainSpec DomainSpec::unit_box(int d, int p) { return box(d, 0.0, 1.0, p); }

DomainSpec DomainSpec::box(int d, double lo, double hi, int p) {
  DomainSpec s;
  s.dim = d;
  s.motions = p;
  for (int a = 0; a < 3; ++a) {
    s.lower[a] = a < d ? lo : 0.0;
    s.upper[a] = a < d ? hi : 1.0;
  }
  return s;
}

void DomainSpec::validate() const {
  require(dim == 2 || dim == 3, "dimension must be 2 or 3");
  for (int a = 0; a < dim; ++a) {
    require(std::isfinite(lower[a]) && std::isfinite(upper[a]), "domain bounds must be finite");
    require(lower[a] < upper[a], "empty domain: lower >= upper on axis " + std::to_string(a));
  }
  require(motions >= 1, "number of motions must be positive");
  require(motions * (dim - 2) < dim,
          "parameters outside p(d-2) < d (p=" + std::to_string(motions) + ", d=" +
              std::to_string(dim) + ")");
}

double DomainSpec::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= upper[a] - lower[a];
  return v;
}

Point DomainSpec::center() const {
  Point c{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) c[a] = 0.5 * (lower[a] + upper[a]);
  return c;
}

bool DomainSpec::contains(const Point& x) const {
  for (int a = 0; a < dim; ++a)
    if (!(x[a] > lower[a] && x[a] < upper[a])) return false;
  return true;
}

bool DomainSpec::contains_closed(const Point& x) const {
  for (int a = 0; a < dim; ++a)
    if (!(x[a] >= lower[a] && x[a] <= upper[a])) return false;
  return true;
}

double CompactSubset::volume(int dim) const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= std::max(0.0, upper[a] - lower[a]);
  return v;
}

Grid::Grid(const DomainSpec& domain, int n) : domain_(domain), dim_(domain.dim), n_(n) {
  domain.validate();
  require(n >= 4, "grid resolution must be at least 4, got " + std::to_string(n));
  cell_volume_ = 1.0;
  for (int a = 0; a < dim_; ++a) {
    h_[a] = (domain.upper[a] - domain.lower[a]) / n;
    cell_volume_ *= h_[a];
  }
  const std::size_t m = static_cast<std::size_t>(n) + 1;
  stride_ = {1, m, dim_ == 3 ? m * m : 0};
  cell_stride_ = {1, static_cast<std::size_t>(n), dim_ == 3 ? static_cast<std::size_t>(n) * n : 0};
  num_nodes_ = dim_ == 3 ? m * m * m : m * m;
  num_cells_ = dim_ == 3 ? static_cast<std::size_t>(n) * n * n : static_cast<std::size_t>(n) * n;

  weights_.resize(num_nodes_);
  for (std::size_t idx = 0; idx < num_nodes_; ++idx) {
    auto mi = node_multi(idx);
    double w = cell_volume_;
    for (int a = 0; a < dim_; ++a)
      if (mi[a] == 0 || mi[a] == n_) w *= 0.5;
    weights_[idx] = w;
  }
}

double Grid::max_h() const {
  double m = 0.0;
  for (int a = 0; a < dim_; ++a) m = std::max(m, h_[a]);
  return m;
}

double Grid::min_h() const {
  double m = h_[0];
  for (int a = 1; a < dim_; ++a) m = std::min(m, h_[a]);
  return m;
}

std::size_t Grid::num_interior() const {
  std::size_t k = 1;
  for (int a = 0; a < dim_; ++a) k *= static_cast<std::size_t>(n_ - 1);
  return k;
}

std::array<int, 3> Grid::node_multi(std::size_t idx) const {
  const std::size_t m = static_cast<std::size_t>(n_) + 1;
  std::array<int, 3> r{0, 0, 0};
  r[0] = static_cast<int>(idx % m);
  idx /= m;
  r[1] = static_cast<int>(idx % m);
  if (dim_ == 3) r[2] = static_cast<int>(idx / m);
  return r;
}

std::array<int, 3> Grid::cell_multi(std::size_t idx) const {
  const std::size_t m = static_cast<std::size_t>(n_);
  std::array<int, 3> r{0, 0, 0};
  r[0] = static_cast<int>(idx % m);
  idx /= m;
  r[1] = static_cast<int>(idx % m);
  if (dim_ == 3) r[2] = static_cast<int>(idx / m);
  return r;
}

Point Grid::node_point(std::size_t idx) const {
  auto mi = node_multi(idx);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = domain_.lower[a] + mi[a] * h_[a];
  return p;
}

Point Grid::cell_center(std::size_t idx) const {
  auto mi = cell_multi(idx);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = domain_.lower[a] + (mi[a] + 0.5) * h_[a];
  return p;
}

bool Grid::is_interior(std::size_t node) const {
  auto mi = node_multi(node);
  for (int a = 0; a < dim_; ++a)
    if (mi[a] == 0 || mi[a] == n_) return false;
  return true;
}

std::size_t Grid::cell_of(const Point& x) const {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    int i = static_cast<int>(std::floor((x[a] - domain_.lower[a]) / h_[a]));
    c[a] = std::clamp(i, 0, n_ - 1);
  }
  return cell_index(c[0], c[1], c[2]);
}

int Grid::interpolation_stencil(const Point& x, std::array<std::size_t, 8>& nodes,
                                std::array<double, 8>& weights) const {
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) {
    double s = (x[a] - domain_.lower[a]) / h_[a];
    s = std::clamp(s, 0.0, static_cast<double>(n_));
    int i = std::min(static_cast<int>(std::floor(s)), n_ - 1);
    base[a] = i;
    frac[a] = s - i;
  }
  const int corners = 1 << dim_;
  for (int c = 0; c < corners; ++c) {
    std::array<int, 3> mi = base;
    double w = 1.0;
    for (int a = 0; a < dim_; ++a) {
      const int bit = (c >> a) & 1;
      mi[a] += bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    nodes[c] = node_index(mi[0], mi[1], mi[2]);
    weights[c] = w;
  }
  return corners;
}

bool Grid::same_as(const Grid& o) const {
  if (this == &o) return true;
  if (dim_ != o.dim_ || n_ != o.n_) return false;
  for (int a = 0; a < dim_; ++a)
    if (domain_.lower[a] != o.domain_.lower[a] || domain_.upper[a] != o.domain_.upper[a])
      return false;
  return true;
}

GridPtr make_grid(const DomainSpec& domain, int n) { return std::make_shared<const Grid>(domain, n); }

GridField::GridField(GridPtr g, double fill) : grid(std::move(g)) {
  values.assign(grid->num_nodes(), fill);
}

GridField::GridField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  require(values.size() == grid->num_nodes(), "field size does not match grid");
}

GridMeasure::GridMeasure(GridPtr g) : grid(std::move(g)) { masses.assign(grid->num_cells(), 0.0); }

GridMeasure::GridMeasure(GridPtr g, std::vector<double> m) : grid(std::move(g)), masses(std::move(m)) {
  require(masses.size() == grid->num_cells(), "measure size does not match grid");
}

double GridMeasure::total() const {
  double s = 0.0;
  for (double m : masses) s += m;
  return s;
}

void check_same_grid(const Grid& a, const Grid& b) {
  if (!a.same_as(b)) throw ValidationError("grid mismatch");
}

void zero_boundary(GridField& f) {
  const Grid& g = *f.grid;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    if (!g.is_interior(i)) f.values[i] = 0.0;
}

bool vanishes_on_boundary(const GridField& f, double tol) {
  const Grid& g = *f.grid;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    if (!g.is_interior(i) && std::abs(f.values[i]) > tol) return false;
  return true;
}

double l2_inner(const GridField& f, const GridField& g) {
  check_same_grid(*f.grid, *g.grid);
  const auto& w = f.grid->node_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f.values[i] * g.values[i];
  return s;
}

double l2_norm(const GridField& f) { return std::sqrt(l2_inner(f, f)); }

double integrate(const GridField& f) {
  const auto& w = f.grid->node_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f.values[i];
  return s;
}

double dirichlet_energy(const GridField& f) {
  const Grid& g = *f.grid;
  double scale = 0.0;
  for (double v : f.values) scale = std::max(scale, std::abs(v));
  if (!vanishes_on_boundary(f, 1e-12 * std::max(1.0, scale)))
    throw ValidationError("dirichlet_energy: field does not vanish on the boundary");
  const int n = g.n();
  const int kmax = g.dim() == 3 ? n : 0;
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t st = g.node_stride(a);
    const double inv_h2 = 1.0 / (g.h(a) * g.h(a));
    double sa = 0.0;
    for (int k = 0; k <= kmax; ++k)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) {
          const std::array<int, 3> mi{i, j, k};
          if (mi[a] == n) continue;
          const std::size_t idx = g.node_index(i, j, k);
          const double d = f.values[idx + st] - f.values[idx];
          sa += d * d;
        }
    s += sa * inv_h2;
  }
  return s * g.cell_volume();
}

GridField neg_laplacian(const GridField& f) {
  const Grid& g = *f.grid;
  GridField out(f.grid);
  const int n = g.n();
  const int k0 = g.dim() == 3 ? 1 : 0;
  const int k1 = g.dim() == 3 ? n - 1 : 0;
  std::array<double, 3> inv_h2{};
  for (int a = 0; a < g.dim(); ++a) inv_h2[a] = 1.0 / (g.h(a) * g.h(a));
  for (int k = k0; k <= k1; ++k)
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t idx = g.node_index(i, j, k);
        double v = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
          const std::size_t st = g.node_stride(a);
          v += inv_h2[a] * (2.0 * f.values[idx] - f.values[idx - st] - f.values[idx + st]);
        }
        out.values[idx] = v;
      }
  return out;
}

double evaluate(const GridField& f, const Point& x) {
  std::array<std::size_t, 8> nodes{};
  std::array<double, 8> w{};
  const int m = f.grid->interpolation_stencil(x, nodes, w);
  double v = 0.0;
  for (int c = 0; c < m; ++c) v += w[c] * f.values[nodes[c]];
  return v;
}

namespace {

// Visits the cells adjacent to a node.
template <class Fn>
void for_adjacent_cells(const Grid& g, const std::array<int, 3>& mi, Fn&& fn) {
  const int corners = 1 << g.dim();
  for (int c = 0; c < corners; ++c) {
    std::array<int, 3> ci{0, 0, 0};
    bool ok = true;
    for (int a = 0; a < g.dim(); ++a) {
      ci[a] = mi[a] - ((c >> a) & 1);
      if (ci[a] < 0 || ci[a] >= g.n()) ok = false;
    }
    if (ok) fn(g.cell_index(ci[0], ci[1], ci[2]));
  }
}

}  // namespace

GridField density_from_measure(const GridMeasure& mu) {
  const Grid& g = *mu.grid;
  GridField out(mu.grid);
  const double inv_vol = 1.0 / g.cell_volume();
  for (std::size_t idx = 0; idx < g.num_nodes(); ++idx) {
    double s = 0.0;
    int cnt = 0;
    for_adjacent_cells(g, g.node_multi(idx), [&](std::size_t c) {
      s += mu.masses[c];
      ++cnt;
    });
    out.values[idx] = s * inv_vol / cnt;
  }
  return out;
}

GridMeasure measure_from_density(const GridField& f) {
  const Grid& g = *f.grid;
  GridMeasure out(f.grid);
  const int corners = 1 << g.dim();
  const double scale = g.cell_volume() / corners;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    auto ci = g.cell_multi(c);
    double s = 0.0;
    for (int q = 0; q < corners; ++q) {
      std::array<int, 3> mi = ci;
      for (int a = 0; a < g.dim(); ++a) mi[a] += (q >> a) & 1;
      s += f.values[g.node_index(mi[0], mi[1], mi[2])];
    }
    out.masses[c] = s * scale;
  }
  return out;
}

double boundary_mass_ratio(const GridMeasure& mu) {
  const Grid& g = *mu.grid;
  double total = 0.0, edge = 0.0;
  std::size_t edge_cells = 0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    total += mu.masses[c];
    auto ci = g.cell_multi(c);
    bool touches = false;
    for (int a = 0; a < g.dim(); ++a)
      if (ci[a] == 0 || ci[a] == g.n() - 1) touches = true;
    if (touches) {
      edge += mu.masses[c];
      ++edge_cells;
    }
  }
  if (total <= 0.0) return 0.0;
  return (edge / edge_cells) / (total / g.num_cells());
}

GridMeasure restrict_measure(const GridMeasure& fine, const GridPtr& coarse) {
  const Grid& f = *fine.grid;
  const Grid& c = *coarse;
  require(f.dim() == c.dim(), "restrict_measure: dimension mismatch");
  require(f.n() % c.n() == 0, "restrict_measure: grids are not nested");
  for (int a = 0; a < f.dim(); ++a)
    require(f.domain().lower[a] == c.domain().lower[a] && f.domain().upper[a] == c.domain().upper[a],
            "restrict_measure: domains differ");
  const int ratio = f.n() / c.n();
  GridMeasure out(coarse);
  for (std::size_t q = 0; q < f.num_cells(); ++q) {
    auto mi = f.cell_multi(q);
    out.masses[c.cell_index(mi[0] / ratio, mi[1] / ratio, mi[2] / ratio)] += fine.masses[q];
  }
  return out;
}

bool subset_admissible(const CompactSubset& u, const Grid& grid) {
  const DomainSpec& d = grid.domain();
  for (int a = 0; a < grid.dim(); ++a) {
    if (!(u.lower[a] <= u.upper[a])) return false;
    const double margin = 2.0 * grid.h(a) * (1.0 - 1e-9);
    if (u.lower[a] - d.lower[a] < margin || d.upper[a] - u.upper[a] < margin) return false;
  }
  return true;
}

std::vector<unsigned char> subset_node_mask(const CompactSubset& u, const Grid& grid) {
  require(subset_admissible(u, grid), "compact subset must sit at least 2h inside the domain");
  std::vector<unsigned char> mask(grid.num_nodes(), 0);
  for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
    const Point x = grid.node_point(i);
    bool in = true;
    for (int a = 0; a < grid.dim(); ++a) {
      const double tol = 1e-9 * grid.h(a);
      if (x[a] < u.lower[a] - tol || x[a] > u.upper[a] + tol) in = false;
    }
    mask[i] = in ? 1 : 0;
  }
  return mask;
}

}  // namespace islt
