#include <cmath>

#include "flow_util.hpp"
#include "islt/errors.hpp"
#include "islt/variational.hpp"

namespace islt {

namespace {

RateValue dv_from_density(const GridField& g, const GridMeasure& mu) {
  const double total = mu.total();
  if (std::abs(total - 1.0) > 1e-6)
    throw ValidationError("dv_rate: input is not a probability measure (mass " + std::to_string(total) + ")");
  if (boundary_mass_ratio(mu) > kBoundaryMassThreshold)
    return RateValue::infinity("mass at the boundary: square root of the density is not in H^1_0");
  GridField psi(g.grid);
  for (std::size_t i = 0; i < g.size(); ++i) psi.values[i] = std::sqrt(std::max(g.values[i], 0.0));
  zero_boundary(psi);
  return RateValue::finite(0.5 * dirichlet_energy(psi));
}

}  // namespace

RateValue dv_rate(const GridMeasure& mu) { return dv_from_density(density_from_measure(mu), mu); }

RateValue dv_rate_density(const GridField& g) { return dv_from_density(g, measure_from_density(g)); }

double rayleigh_value(const GridField& psi) { return 0.5 * dirichlet_energy(psi) / l2_inner(psi, psi); }

GridField rayleigh_gradient(const GridField& psi) {
  const double N = l2_inner(psi, psi);
  const double R = 0.5 * dirichlet_energy(psi) / N;
  GridField g = neg_laplacian(psi);
  detail::axpy(-2.0 * R, psi, g);
  detail::scale(g, 1.0 / N);
  return g;
}

RateResult minimize_dv(const GridPtr& grid, const FlowOptions& opts, const GridField* init) {
  const Grid& g = *grid;
  GridField psi = init ? *init : random_smooth_field(grid, opts.seed);
  check_same_grid(g, *psi.grid);
  zero_boundary(psi);
  const double n0 = l2_norm(psi);
  require(n0 > 0.0, "minimize_dv: zero initial field");
  detail::scale(psi, 1.0 / n0);
  detail::axpy(opts.noise, random_smooth_field(grid, opts.seed ^ 0x9E3779B97F4A7C15ULL, 6), psi);
  detail::scale(psi, 1.0 / l2_norm(psi));

  const bool sob = opts.metric == FlowMetric::sobolev;
  const detail::SobolevPreconditioner P(grid, 0.0);
  const double eta_max = sob ? 1.0 : 0.5 * g.min_h() * g.min_h();
  double eta = opts.eta0 > 0 ? opts.eta0 : (sob ? 1.0 : 0.1 * g.min_h() * g.min_h());

  RateResult res;
  double R = rayleigh_value(psi);
  GridField G = rayleigh_gradient(psi);
  double gn = l2_norm(G);
  double ref = gn;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    ref = std::max(ref, gn);
    if (gn <= opts.rel_tol * ref || gn < 1e-13 * std::max(1.0, R)) {
      res.converged = true;
      break;
    }
    GridField d = sob ? P.apply(G) : G;
    detail::axpy(-l2_inner(d, psi), psi, d);
    const double slope = l2_inner(G, d);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      GridField trial = detail::lincomb(1.0, psi, -eta, d);
      detail::scale(trial, 1.0 / l2_norm(trial));
      const double Rt = rayleigh_value(trial);
      if (Rt <= R - 1e-4 * eta * slope) {
        psi = std::move(trial);
        R = Rt;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      // Stalled at floating-point resolution of R.
      res.converged = gn <= 1e-4 * ref;
      break;
    }
    eta = std::min(2.0 * eta, eta_max);
    G = rayleigh_gradient(psi);
    gn = l2_norm(G);
  }
  if (!res.converged)
    throw NumericalError("minimize_dv: no convergence after " + std::to_string(it) + " iterations");

  double sum = 0.0;
  for (double v : psi.values) sum += v;
  if (sum < 0) detail::scale(psi, -1.0);
  res.iterations = it;
  res.grad_norm = gn;
  res.value = RateValue::finite(0.5 * dirichlet_energy(psi));
  res.minimizer.fields = {psi};
  res.minimizer.weights = {1.0};
  return res;
}

}  // namespace islt
