#include "islt/spectral.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "islt/errors.hpp"

namespace islt {

GridField SpectralBasis::field(int n) const {
  require(n >= 0 && n < count(), "mode index out of range");
  GridField f(grid);
  for (std::size_t i = 0; i < grid->num_nodes(); ++i) f.values[i] = fields(static_cast<Eigen::Index>(i), n);
  return f;
}

Eigen::VectorXd SpectralBasis::values_at(const Point& x) const {
  std::array<std::size_t, 8> nodes{};
  std::array<double, 8> w{};
  const int m = grid->interpolation_stencil(x, nodes, w);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(count());
  for (int c = 0; c < m; ++c) {
    if (w[c] == 0.0) continue;
    v += w[c] * fields.row(static_cast<Eigen::Index>(nodes[c])).transpose();
  }
  return v;
}

int default_mode_count(const Grid& grid) {
  return static_cast<int>(std::min<std::size_t>(500, grid.num_interior() / 4));
}

namespace {

// Flip sign so that the first entry of (near-)largest magnitude is positive.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double big = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= big * (1.0 - 1e-9)) {
      if (v[i] < 0) v = -v;
      return;
    }
  }
}

struct Axis1D {
  Eigen::VectorXd mu;      // eigenvalues of -d²/dx² (FD)
  Eigen::MatrixXd vec;     // (n-1) x (n-1), L²(h)-normalized columns
};

Axis1D axis_modes(int n, double h) {
  const int m = n - 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, 2.0 / (h * h));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(std::max(m - 1, 0), -1.0 / (h * h));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolver did not converge");
  Axis1D ax;
  ax.mu = es.eigenvalues();
  ax.vec = es.eigenvectors() / std::sqrt(h);
  return ax;
}

}  // namespace

SpectralBasis dirichlet_eigs(const GridPtr& grid, int count) {
  const Grid& g = *grid;
  require(count >= 1, "dirichlet_eigs: need at least one mode");
  require(static_cast<std::size_t>(count) <= g.num_interior(),
          "dirichlet_eigs: N exceeds the number of interior nodes");
  const int d = g.dim();
  const int n = g.n();
  const int m = n - 1;
  std::array<Axis1D, 3> ax;
  for (int a = 0; a < d; ++a) ax[a] = axis_modes(n, g.h(a));

  using Key = std::tuple<double, int, int, int>;
  std::vector<Key> keys;
  keys.reserve(g.num_interior());
  const int kmax = d == 3 ? m : 1;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < kmax; ++c) {
        double mu = ax[0].mu[a] + ax[1].mu[b];
        if (d == 3) mu += ax[2].mu[c];
        keys.emplace_back(0.5 * mu, a, b, c);
      }
  std::partial_sort(keys.begin(), keys.begin() + count, keys.end());

  SpectralBasis basis;
  basis.grid = grid;
  basis.eigenvalues.resize(count);
  basis.modes.resize(count);
  basis.fields = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.num_nodes()), count);
  for (int q = 0; q < count; ++q) {
    const auto [lam, a, b, c] = keys[q];
    basis.eigenvalues[q] = lam;
    basis.modes[q] = {a + 1, b + 1, d == 3 ? c + 1 : 0};
    auto col = basis.fields.col(q);
    for (int k = 1; k <= kmax; ++k)
      for (int j = 1; j <= m; ++j)
        for (int i = 1; i <= m; ++i) {
          double v = ax[0].vec(i - 1, a) * ax[1].vec(j - 1, b);
          if (d == 3) v *= ax[2].vec(k - 1, c);
          col[static_cast<Eigen::Index>(g.node_index(i, j, d == 3 ? k : 0))] = v;
        }
    fix_sign(col);
  }
  basis.sup_norm = basis.fields.cwiseAbs().maxCoeff();
  return basis;
}

namespace {

template <class Coef>
SeriesValue series(const SpectralBasis& basis, const Point& x, const Point& y, Coef&& coef) {
  const Eigen::VectorXd vx = basis.values_at(x);
  const Eigen::VectorXd vy = basis.values_at(y);
  const int N = basis.count();
  const int tail_from = static_cast<int>(0.8 * N);
  SeriesValue out;
  double tail = 0.0;
  for (int q = 0; q < N; ++q) {
    const double term = coef(basis.eigenvalues[q]) * vx[q] * vy[q];
    out.value += term;
    if (q >= tail_from) tail += term;
  }
  out.tail = std::abs(tail);
  out.warning = out.tail > 0.01 * std::abs(out.value);
  return out;
}

}  // namespace

SeriesValue transition_density(const SpectralBasis& basis, double s, const Point& x, const Point& y) {
  require(s > 0.0, "transition_density: s must be positive");
  SeriesValue out = series(basis, x, y, [s](double l) { return std::exp(-s * l); });
  out.value = std::max(out.value, 0.0);
  out.tail = std::exp(-s * basis.eigenvalues.back()) * basis.count() * basis.sup_norm * basis.sup_norm;
  out.warning = out.tail > 0.01 * out.value;
  return out;
}

SeriesValue green_function(const SpectralBasis& basis, const Point& x, const Point& y) {
  bool same = true;
  for (int a = 0; a < basis.grid->dim(); ++a)
    if (x[a] != y[a]) same = false;
  require(!same, "green_function: x == y (diagonal diverges)");
  return series(basis, x, y, [](double l) { return 1.0 / l; });
}

SeriesValue truncated_green(const SpectralBasis& basis, double delta, const Point& x, const Point& y) {
  require(delta > 0.0, "truncated_green: delta must be positive");
  return series(basis, x, y, [delta](double l) { return -std::expm1(-delta * l) / l; });
}

SeriesValue green_complement(const SpectralBasis& basis, double delta, const Point& x, const Point& y) {
  require(delta > 0.0, "green_complement: delta must be positive");
  return series(basis, x, y, [delta](double l) { return std::exp(-delta * l) / l; });
}

double weyl_slope(const std::vector<double>& ev, int first, int last) {
  require(first >= 1 && last <= static_cast<int>(ev.size()) && first <= last,
          "weyl_slope: range outside [1, N]");
  require(last - first + 1 >= 20, "weyl_slope: range shorter than 20");
  if (ev[last - 1] == ev[first - 1]) throw ValidationError("weyl_slope: constant eigenvalue sequence");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int cnt = last - first + 1;
  for (int q = first; q <= last; ++q) {
    require(ev[q - 1] > 0.0, "weyl_slope: nonpositive eigenvalue");
    const double lx = std::log(static_cast<double>(q)), ly = std::log(ev[q - 1]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

double weyl_slope(const SpectralBasis& basis, int first, int last) {
  return weyl_slope(basis.eigenvalues, first, last);
}

PrincipalPair schroedinger_ground_state(const GridPtr& grid, const GridField& f) {
  const Grid& g = *grid;
  check_same_grid(g, *f.grid);
  const int d = g.dim();
  std::vector<std::size_t> nodes;
  std::vector<int> slot(g.num_nodes(), -1);
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    if (g.is_interior(i)) {
      slot[i] = static_cast<int>(nodes.size());
      nodes.push_back(i);
    }
  const int m = static_cast<int>(nodes.size());
  double fmax = -INFINITY;
  for (std::size_t i : nodes) {
    require(std::isfinite(f.values[i]), "schroedinger_principal: potential must be finite");
    fmax = std::max(fmax, f.values[i]);
  }
  // Shift so that A = H - f - sigma >= 1/2 K + 1 is positive definite.
  const double sigma = -fmax - 1.0;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(m) * (2 * d + 1));
  for (int r = 0; r < m; ++r) {
    const std::size_t idx = nodes[r];
    double diag = -f.values[idx] - sigma;
    for (int a = 0; a < d; ++a) {
      const double c = 0.5 / (g.h(a) * g.h(a));
      diag += 2.0 * c;
      const std::size_t st = g.node_stride(a);
      for (std::size_t nb : {idx - st, idx + st})
        if (slot[nb] >= 0) trip.emplace_back(r, slot[nb], -c);
    }
    trip.emplace_back(r, r, diag);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("schroedinger_principal: factorization failed");

  // Lanczos on A^{-1} with full reorthogonalization.
  const int max_steps = std::min(m, 150);
  Eigen::MatrixXd V(m, max_steps + 1);
  std::vector<double> alpha, beta;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m) / std::sqrt(static_cast<double>(m));
  V.col(0) = v;
  double theta = 0.0;
  Eigen::VectorXd ritz;
  int steps = 0;
  bool converged = false;
  for (int k = 0; k < max_steps; ++k) {
    Eigen::VectorXd w = solver.solve(V.col(k));
    const double a = V.col(k).dot(w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(k + 1) * (V.leftCols(k + 1).transpose() * w);
    const double b = w.norm();
    steps = k + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
    for (int i = 0; i < steps; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < steps) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues()[steps - 1];
    ritz = es.eigenvectors().col(steps - 1);
    const double resid = std::abs(b * ritz[steps - 1]);
    if (resid <= 1e-13 * std::abs(theta) || b < 1e-300) {
      converged = true;
      break;
    }
    beta.push_back(b);
    V.col(k + 1) = w / b;
  }
  if (!converged) throw NumericalError("schroedinger_principal: Lanczos did not converge");

  Eigen::VectorXd u = V.leftCols(steps) * ritz;
  if (u.sum() < 0) u = -u;
  PrincipalPair out;
  out.value = -(sigma + 1.0 / theta);
  out.iterations = steps;
  out.field = GridField(grid);
  for (int r = 0; r < m; ++r) out.field.values[nodes[r]] = u[r];
  const double nrm = l2_norm(out.field);
  for (double& x : out.field.values) x /= nrm;
  return out;
}

double schroedinger_principal(const GridPtr& grid, const GridField& f) {
  return schroedinger_ground_state(grid, f).value;
}

}  // namespace islt
