#include "islt/sine_transform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "islt/errors.hpp"

namespace islt {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

SineTransform::SineTransform(GridPtr grid) : grid_(std::move(grid)) {
  const Grid& g = *grid_;
  const int d = g.dim();
  const int n = g.n();
  const int m = n - 1;
  size_ = g.num_interior();
  interior_nodes_.reserve(size_);
  const int kmax = d == 3 ? m : 1;
  for (int k = 1; k <= kmax; ++k)
    for (int j = 1; j <= m; ++j)
      for (int i = 1; i <= m; ++i) interior_nodes_.push_back(g.node_index(i, j, d == 3 ? k : 0));

  std::array<std::vector<double>, 3> mu;
  for (int a = 0; a < d; ++a) {
    mu[a].resize(m);
    for (int q = 1; q <= m; ++q) {
      const double s = std::sin(q * M_PI / (2.0 * n));
      mu[a][q - 1] = 4.0 * s * s / (g.h(a) * g.h(a));
    }
  }
  lambda_.resize(size_);
  std::size_t idx = 0;
  for (int k = 0; k < (d == 3 ? m : 1); ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        double v = mu[0][i] + mu[1][j];
        if (d == 3) v += mu[2][k];
        lambda_[idx++] = 0.5 * v;
      }
  lambda_min_ = *std::min_element(lambda_.begin(), lambda_.end());
  lambda_max_ = *std::max_element(lambda_.begin(), lambda_.end());
  inverse_scale_ = 1.0;
  for (int a = 0; a < d; ++a) inverse_scale_ /= 2.0 * n;

  std::vector<int> dims(d, m);
  std::vector<fftw_r2r_kind> kinds(d, FFTW_RODFT00);
  std::vector<double> a(size_), b(size_);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_r2r(d, dims.data(), a.data(), b.data(), kinds.data(),
                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_) throw NumericalError("failed to create sine transform plan");
}

SineTransform::~SineTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void SineTransform::transform(const double* in, double* out) const {
  fftw_execute_r2r(static_cast<fftw_plan>(plan_), const_cast<double*>(in), out);
}

std::vector<double> SineTransform::analyze(const GridField& f) const {
  check_same_grid(*f.grid, *grid_);
  std::vector<double> packed(size_), out(size_);
  for (std::size_t q = 0; q < size_; ++q) packed[q] = f.values[interior_nodes_[q]];
  transform(packed.data(), out.data());
  return out;
}

GridField SineTransform::synthesize(const std::vector<double>& coeffs) const {
  require(coeffs.size() == size_, "coefficient vector has the wrong length");
  std::vector<double> out(size_);
  transform(coeffs.data(), out.data());
  GridField f(grid_);
  for (std::size_t q = 0; q < size_; ++q) f.values[interior_nodes_[q]] = out[q] * inverse_scale_;
  return f;
}

GridField SineTransform::synthesize_scaled(const std::vector<double>& coeffs,
                                           const std::function<double(double)>& g) const {
  require(coeffs.size() == size_, "coefficient vector has the wrong length");
  std::vector<double> scaled(size_);
  for (std::size_t q = 0; q < size_; ++q) scaled[q] = coeffs[q] * g(lambda_[q]);
  return synthesize(scaled);
}

GridField SineTransform::apply(const GridField& f, const std::function<double(double)>& g) const {
  return synthesize_scaled(analyze(f), g);
}

DirichletSemigroup::DirichletSemigroup(GridPtr grid)
    : dst_(std::make_shared<SineTransform>(std::move(grid))) {}

GridField DirichletSemigroup::heat(double s, const GridField& f) const {
  require(s >= 0.0, "heat semigroup needs s >= 0");
  return dst_->apply(f, [s](double l) { return std::exp(-s * l); });
}

GridField DirichletSemigroup::survival(double s) const {
  GridField one(grid(), 1.0);
  zero_boundary(one);
  return heat(s, one);
}

GridField DirichletSemigroup::point_source(const Point& x) const {
  const Grid& g = *grid();
  require(g.domain().contains_closed(x), "point source outside the domain");
  std::array<std::size_t, 8> nodes{};
  std::array<double, 8> w{};
  const int m = g.interpolation_stencil(x, nodes, w);
  GridField delta(grid());
  for (int c = 0; c < m; ++c)
    if (g.is_interior(nodes[c])) delta.values[nodes[c]] += w[c] / g.cell_volume();
  return delta;
}

GridField DirichletSemigroup::kernel_from(double s, const Point& x) const {
  return heat(s, point_source(x));
}

}  // namespace islt
