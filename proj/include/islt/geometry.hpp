#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace islt {

using Point = std::array<double, 3>;

struct DomainSpec {
  int dim = 2;
  Point lower{0.0, 0.0, 0.0};
  Point upper{1.0, 1.0, 1.0};
  int motions = 2;

  static DomainSpec unit_box(int d, int p = 2);
  static DomainSpec box(int d, double lo, double hi, int p = 2);

  // Throws ValidationError when the box is empty or (d, p) is outside p(d-2) < d.
  void validate() const;
  double volume() const;
  Point center() const;
  bool contains(const Point& x) const;   // open box
  bool contains_closed(const Point& x) const;
};

struct CompactSubset {
  Point lower{0.0, 0.0, 0.0};
  Point upper{0.0, 0.0, 0.0};

  double volume(int dim) const;
};

class Grid {
public:
  Grid(const DomainSpec& domain, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  const DomainSpec& domain() const { return domain_; }
  double h(int axis) const { return h_[axis]; }
  double max_h() const;
  double min_h() const;
  double cell_volume() const { return cell_volume_; }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_interior() const;

  std::size_t node_index(int i, int j, int k = 0) const {
    return static_cast<std::size_t>(i) + stride_[1] * j + stride_[2] * k;
  }
  std::size_t cell_index(int i, int j, int k = 0) const {
    return static_cast<std::size_t>(i) + cell_stride_[1] * j + cell_stride_[2] * k;
  }
  std::size_t node_stride(int axis) const { return stride_[axis]; }
  std::size_t cell_stride(int axis) const { return cell_stride_[axis]; }
  std::array<int, 3> node_multi(std::size_t idx) const;
  std::array<int, 3> cell_multi(std::size_t idx) const;

  Point node_point(std::size_t idx) const;
  Point cell_center(std::size_t idx) const;
  bool is_interior(std::size_t node) const;
  // Trapezoid weight: cell volume times the fraction of the 2^d adjacent cells that exist.
  double node_weight(std::size_t node) const { return weights_[node]; }
  const std::vector<double>& node_weights() const { return weights_; }
  // Cell containing x, clamped into the grid.
  std::size_t cell_of(const Point& x) const;
  // Multilinear interpolation stencil: up to 2^d (node, weight) pairs.
  int interpolation_stencil(const Point& x, std::array<std::size_t, 8>& nodes,
                            std::array<double, 8>& weights) const;

  bool same_as(const Grid& other) const;

private:
  DomainSpec domain_;
  int dim_;
  int n_;
  std::array<double, 3> h_{1.0, 1.0, 1.0};
  double cell_volume_;
  std::size_t num_nodes_;
  std::size_t num_cells_;
  std::array<std::size_t, 3> stride_{};
  std::array<std::size_t, 3> cell_stride_{};
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(const DomainSpec& domain, int n);

struct GridField {
  GridPtr grid;
  std::vector<double> values;

  GridField() = default;
  explicit GridField(GridPtr g, double fill = 0.0);
  GridField(GridPtr g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

struct GridMeasure {
  GridPtr grid;
  std::vector<double> masses;

  GridMeasure() = default;
  explicit GridMeasure(GridPtr g);
  GridMeasure(GridPtr g, std::vector<double> m);

  double total() const;
};

void check_same_grid(const Grid& a, const Grid& b);

// Field sampled from a function of the node position.
template <class F>
GridField sample_field(const GridPtr& grid, F&& fn) {
  GridField out(grid);
  for (std::size_t i = 0; i < grid->num_nodes(); ++i) out.values[i] = fn(grid->node_point(i));
  return out;
}

void zero_boundary(GridField& f);
bool vanishes_on_boundary(const GridField& f, double tol = 0.0);

double l2_inner(const GridField& f, const GridField& g);
double l2_norm(const GridField& f);
double integrate(const GridField& f);
double dirichlet_energy(const GridField& f);
// K f with K the positive FD Laplacian -Δ_h; boundary entries of the result are zero.
GridField neg_laplacian(const GridField& f);
double evaluate(const GridField& f, const Point& x);

// Node density from cell masses: each node averages the densities of its adjacent cells.
GridField density_from_measure(const GridMeasure& mu);
// Cell masses from a node density: cell volume times the mean of the 2^d corners.
GridMeasure measure_from_density(const GridField& g);
// Fraction of mass in cells that touch the boundary, divided by the fraction of such cells.
double boundary_mass_ratio(const GridMeasure& mu);

// Cell masses aggregated onto a coarser nested grid (fine n must be a multiple of coarse n).
GridMeasure restrict_measure(const GridMeasure& fine, const GridPtr& coarse);

bool subset_admissible(const CompactSubset& u, const Grid& grid);
std::vector<unsigned char> subset_node_mask(const CompactSubset& u, const Grid& grid);

}  // namespace islt
