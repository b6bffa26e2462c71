#include <algorithm>
#include <cmath>

#include "flow_util.hpp"
#include "islt/errors.hpp"
#include "islt/variational.hpp"

namespace islt {

namespace {

double masked_power_sum(const GridField& phi, const std::vector<unsigned char>& mask, int p) {
  const auto& w = phi.grid->node_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i)
    if (mask[i]) s += w[i] * std::pow(std::abs(phi.values[i]), 2 * p);
  return s;
}

GridField first_mode_guess(const GridPtr& grid) {
  const DomainSpec& dom = grid->domain();
  return sample_field(grid, [&](const Point& x) {
    double v = 1.0;
    for (int a = 0; a < dom.dim; ++a) v *= std::sin(M_PI * (x[a] - dom.lower[a]) / (dom.upper[a] - dom.lower[a]));
    return v;
  });
}

void normalize_masked(GridField& phi, const std::vector<unsigned char>& mask, int p) {
  const double s = masked_power_sum(phi, mask, p);
  detail::scale(phi, 1.0 / std::pow(s, 1.0 / (2.0 * p)));
}

void make_nonnegative(GridField& f) {
  for (double& v : f.values) v = std::abs(v);
  zero_boundary(f);
}

}  // namespace

double theta_quotient(const GridField& phi, const std::vector<unsigned char>& mask, int p) {
  const double S = masked_power_sum(phi, mask, p);
  return 0.5 * p * dirichlet_energy(phi) / std::pow(S, 1.0 / p);
}

GridField theta_gradient(const GridField& phi, const std::vector<unsigned char>& mask, int p) {
  const double S = masked_power_sum(phi, mask, p);
  const double N = std::pow(S, 1.0 / p);
  const double D = dirichlet_energy(phi);
  GridField g = neg_laplacian(phi);
  detail::scale(g, p / N);
  const double c = 0.5 * p * D / (N * N) * 2.0 * std::pow(S, 1.0 / p - 1.0);
  for (std::size_t i = 0; i < phi.size(); ++i)
    if (mask[i]) {
      const double v = phi.values[i];
      g.values[i] -= c * std::pow(std::abs(v), 2 * p - 2) * v;
    }
  return g;
}

RateResult theta(const GridPtr& grid, const CompactSubset& U, int p, const FlowOptions& opts) {
  require(p >= 2, "theta: p must be at least 2");
  const auto mask = subset_node_mask(U, *grid);
  const detail::SobolevPreconditioner P(grid, 0.0);
  const bool sob = opts.metric == FlowMetric::sobolev;
  const double h2 = grid->min_h() * grid->min_h();
  RateResult best;
  best.value = RateValue::infinity("no run completed");
  const int runs = std::max(1, opts.restarts);
  for (int run = 0; run < runs; ++run) {
    GridField phi = first_mode_guess(grid);
    detail::axpy(opts.noise * (1 + run), random_smooth_field(grid, opts.seed + 7919ULL * run, 6), phi);
    make_nonnegative(phi);
    normalize_masked(phi, mask, p);
    double eta = opts.eta0 > 0 ? opts.eta0 : (sob ? 1.0 : 0.1 * h2);
    const double eta_max = sob ? 4.0 : 0.5 * h2;
    double Q = theta_quotient(phi, mask, p);
    GridField G = theta_gradient(phi, mask, p);
    double gn = l2_norm(G), ref = gn;
    bool conv = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      ref = std::max(ref, gn);
      if (gn <= opts.rel_tol * ref) {
        conv = true;
        break;
      }
      GridField d = sob ? P.apply(G) : G;
      const double slope = l2_inner(G, d);
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        GridField trial = detail::lincomb(1.0, phi, -eta, d);
        make_nonnegative(trial);
        normalize_masked(trial, mask, p);
        const double Qt = theta_quotient(trial, mask, p);
        if (Qt <= Q - 1e-4 * eta * slope) {
          phi = std::move(trial);
          Q = Qt;
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) {
        conv = gn <= 1e-4 * ref;
        break;
      }
      eta = std::min(2.0 * eta, eta_max);
      G = theta_gradient(phi, mask, p);
      gn = l2_norm(G);
    }
    if (!conv) continue;
    const double value = 0.5 * p * dirichlet_energy(phi);
    if (!best.value.is_finite() || value < best.value.value()) {
      best.value = RateValue::finite(value);
      best.minimizer.fields.assign(p, phi);
      best.minimizer.weights.assign(p, 1.0);
      best.iterations = it;
      best.grad_norm = gn;
      best.converged = true;
      best.restart_index = run;
      best.max_pairwise_distance = 0.0;
    }
  }
  if (!best.converged) throw NumericalError("theta: gradient flow did not converge");
  return best;
}

double chi_energy(const GridField& psi, int p) { return 0.5 * p * dirichlet_energy(psi); }

GridField chi_gradient(const GridField& psi, int p) {
  GridField g = neg_laplacian(psi);
  detail::scale(g, p);
  return g;
}

namespace {

// Maps ψ ≥ 0 to α ψ^β with ||·||_2 = ||·||_{2p} = 1. Returns false when no such β exists.
bool retract_two_norms(GridField& psi, int p) {
  const auto& w = psi.grid->node_weights();
  double mx = 0.0;
  for (double v : psi.values) mx = std::max(mx, v);
  if (mx <= 0.0) return false;
  std::vector<std::size_t> idx;
  std::vector<double> logv;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (psi.values[i] > 0.0) {
      idx.push_back(i);
      logv.push_back(std::log(psi.values[i] / mx));
    }
  // log ||ψ^β||_{q}, computed with max-normalized values.
  auto lognorm = [&](double beta, double q) {
    double s = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += w[idx[k]] * std::exp(q * beta * logv[k]);
    return std::log(s) / q;
  };
  auto ratio = [&](double beta) { return lognorm(beta, 2.0 * p) - lognorm(beta, 2.0); };
  double lo = 1.0, hi = 1.0;
  double r = ratio(1.0);
  if (r > 0) {
    for (int k = 0; k < 200 && ratio(lo) > 0; ++k) lo *= 0.5;
    if (ratio(lo) > 0) return false;
  } else {
    for (int k = 0; k < 200 && ratio(hi) < 0; ++k) hi *= 2.0;
    if (ratio(hi) < 0) return false;
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = std::sqrt(lo * hi);
    if (ratio(mid) > 0) hi = mid;
    else lo = mid;
    if (hi / lo - 1.0 < 1e-15) break;
  }
  const double beta = std::sqrt(lo * hi);
  const double l2 = lognorm(beta, 2.0);
  std::fill(psi.values.begin(), psi.values.end(), 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) psi.values[idx[k]] = std::exp(beta * logv[k] - l2);
  return true;
}

}  // namespace

RateResult chi_B(const GridPtr& grid, int p, const FlowOptions& opts) {
  require(p >= 2, "chi_B: p must be at least 2");
  const Grid& g = *grid;
  RateResult res;
  const double support = static_cast<double>(g.num_interior()) * g.cell_volume();
  if (support <= 1.0) {
    res.value = RateValue::infinity(
        "constraints ||psi||_2 = ||psi||_2p = 1 are infeasible: by Hoelder they force |psi| constant, "
        "which needs vol(B) > 1");
    return res;
  }
  const detail::SobolevPreconditioner P(grid, 0.0);
  RateResult best;
  best.value = RateValue::infinity("no run completed");
  const int runs = std::max(1, opts.restarts);
  for (int run = 0; run < runs; ++run) {
    GridField psi = first_mode_guess(grid);
    detail::axpy(opts.noise * (1 + run), random_smooth_field(grid, opts.seed + 104729ULL * run, 6), psi);
    make_nonnegative(psi);
    if (!retract_two_norms(psi, p)) continue;
    double E = chi_energy(psi, p);
    double eta = opts.eta0 > 0 ? opts.eta0 : 1.0;
    double ref = 0.0, rn = 0.0;
    bool conv = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
      const GridField G = chi_gradient(psi, p);
      GridField a1 = psi;
      detail::scale(a1, 2.0);
      GridField a2(grid);
      for (std::size_t i = 0; i < psi.size(); ++i) a2.values[i] = 2.0 * p * std::pow(psi.values[i], 2 * p - 1);
      const GridField Pa1 = P.apply(a1), Pa2 = P.apply(a2), PG = P.apply(G);
      const double m11 = l2_inner(a1, Pa1), m12 = l2_inner(a1, Pa2), m22 = l2_inner(a2, Pa2);
      const double r1 = l2_inner(a1, PG), r2 = l2_inner(a2, PG);
      const double det = m11 * m22 - m12 * m12;
      const double mu1 = (m22 * r1 - m12 * r2) / det, mu2 = (m11 * r2 - m12 * r1) / det;
      GridField r = G;
      detail::axpy(-mu1, a1, r);
      detail::axpy(-mu2, a2, r);
      GridField d = PG;
      detail::axpy(-mu1, Pa1, d);
      detail::axpy(-mu2, Pa2, d);
      rn = l2_norm(r);
      ref = std::max(ref, rn);
      if (rn <= opts.rel_tol * ref) {
        conv = true;
        break;
      }
      const double slope = l2_inner(G, d);
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        GridField trial = detail::lincomb(1.0, psi, -eta, d);
        make_nonnegative(trial);
        if (retract_two_norms(trial, p)) {
          const double Et = chi_energy(trial, p);
          if (Et <= E - 1e-4 * eta * slope) {
            psi = std::move(trial);
            E = Et;
            accepted = true;
            break;
          }
        }
        eta *= 0.5;
      }
      if (!accepted) {
        conv = rn <= 1e-4 * ref;
        break;
      }
      eta = std::min(2.0 * eta, 4.0);
    }
    if (!conv) continue;
    if (!best.value.is_finite() || E < best.value.value()) {
      best.value = RateValue::finite(0.5 * p * dirichlet_energy(psi));
      best.minimizer.fields.assign(p, psi);
      best.minimizer.weights.assign(p, 1.0);
      best.iterations = it;
      best.grad_norm = rn;
      best.converged = true;
      best.restart_index = run;
    }
  }
  if (!best.converged) throw NumericalError("chi_B: constrained flow did not converge");
  return best;
}

}  // namespace islt
