#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "flow_util.hpp"
#include "islt/errors.hpp"
#include "islt/variational.hpp"

namespace islt {

namespace {

struct Support {
  std::vector<unsigned char> mask;  // interior nodes with g > 0
  GridField gp;                     // g^{1/p} on the support
};

Support make_support(const GridField& g, int p) {
  const Grid& grid = *g.grid;
  Support s{std::vector<unsigned char>(g.size(), 0), GridField(g.grid)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    require(std::isfinite(g.values[i]) && g.values[i] >= 0.0, "target density must be finite and nonnegative");
    if (grid.is_interior(i) && g.values[i] > 0.0) {
      s.mask[i] = 1;
      s.gp.values[i] = std::pow(g.values[i], 1.0 / p);
    }
  }
  return s;
}

std::vector<GridField> raw_fields(const Support& s, const std::vector<GridField>& u) {
  std::vector<GridField> phi;
  phi.reserve(u.size());
  for (const auto& ui : u) {
    GridField f(ui.grid);
    for (std::size_t k = 0; k < f.size(); ++k)
      if (s.mask[k]) f.values[k] = std::sqrt(s.gp.values[k] * std::exp(ui.values[k]));
    phi.push_back(std::move(f));
  }
  return phi;
}

double log_norm_sum(const std::vector<GridField>& phi) {
  double c = 0.0;
  for (const auto& f : phi) c += std::log(l2_inner(f, f));
  return c;
}

void project_sum_zero(std::vector<GridField>& v, const std::vector<unsigned char>& mask) {
  const std::size_t p = v.size();
  for (std::size_t k = 0; k < v.front().size(); ++k) {
    if (!mask[k]) {
      for (auto& f : v) f.values[k] = 0.0;
      continue;
    }
    double m = 0.0;
    for (const auto& f : v) m += f.values[k];
    m /= static_cast<double>(p);
    for (auto& f : v) f.values[k] -= m;
  }
}

std::vector<GridField> constraint_gradient(const std::vector<GridField>& phi) {
  std::vector<GridField> c;
  for (const auto& f : phi) {
    GridField ci(f.grid);
    const double N = l2_inner(f, f);
    for (std::size_t k = 0; k < f.size(); ++k) ci.values[k] = f.values[k] * f.values[k] / N;
    c.push_back(std::move(ci));
  }
  return c;
}

void add_scaled(std::vector<GridField>& u, double a, const std::vector<GridField>& v) {
  for (std::size_t i = 0; i < u.size(); ++i) detail::axpy(a, v[i], u[i]);
}

std::vector<GridField> shifted(const std::vector<GridField>& u, double a, const std::vector<GridField>& v) {
  std::vector<GridField> w = u;
  add_scaled(w, a, v);
  return w;
}

// Moves u along the projected constraint gradient until Σ log N_i = 0.
bool retract(const Support& s, std::vector<GridField>& u) {
  auto C = [&](const std::vector<GridField>& x) { return log_norm_sum(raw_fields(s, x)); };
  double c0 = C(u);
  if (std::abs(c0) < 1e-13) return true;
  std::vector<GridField> dir = constraint_gradient(raw_fields(s, u));
  project_sum_zero(dir, s.mask);
  const double dd = detail::dot(dir, dir);
  if (!(dd > 1e-300)) return false;
  // g(t) = C(u + t dir) is convex with g'(0) = dd > 0. Bracket a root on the side of decrease.
  double lo, hi;
  if (c0 < 0) {
    lo = 0.0;
    hi = -c0 / dd;
    for (int k = 0; k < 200 && C(shifted(u, hi, dir)) < 0; ++k) hi *= 2.0;
    if (C(shifted(u, hi, dir)) < 0) return false;
  } else {
    hi = 0.0;
    lo = -c0 / dd;
    int k = 0;
    for (; k < 60 && C(shifted(u, lo, dir)) > 0; ++k) lo *= 1.5;
    if (C(shifted(u, lo, dir)) > 0) return false;
  }
  double t = 0.5 * (lo + hi);
  for (int k = 0; k < 200; ++k) {
    t = 0.5 * (lo + hi);
    const double ct = C(shifted(u, t, dir));
    if (std::abs(ct) < 1e-14) break;
    // The bracket keeps C(lo) < 0 < C(hi).
    if (ct < 0) lo = t;
    else hi = t;
    if (hi - lo <= 1e-16 * std::max(1.0, std::abs(t))) break;
  }
  add_scaled(u, t, dir);
  return std::abs(C(u)) < 1e-10;
}

// Closed-form optimal constant shifts for J: equalize b_i D_i.
void rebalance(const Support& s, const std::vector<double>& b, std::vector<GridField>& u) {
  const auto phi = raw_fields(s, u);
  const std::size_t p = u.size();
  std::vector<double> e(p);
  double logmean = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    e[i] = b[i] * dirichlet_energy(phi[i]);
    if (!(e[i] > 0.0)) return;
    logmean += std::log(e[i]);
  }
  logmean /= static_cast<double>(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double kappa = logmean - std::log(e[i]);
    for (std::size_t k = 0; k < u[i].size(); ++k)
      if (s.mask[k]) u[i].values[k] += kappa;
  }
}

struct RunOutcome {
  std::vector<GridField> u;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

RunOutcome descend(const DecompositionProblem& prob, const Support& s, std::vector<GridField> u,
                   const FlowOptions& opts) {
  const GridPtr& grid = prob.g.grid;
  const detail::SobolevPreconditioner P(grid, 0.0);
  const bool sob = opts.metric == FlowMetric::sobolev;
  const double h2 = grid->min_h() * grid->min_h();
  double eta = opts.eta0 > 0 ? opts.eta0 : (sob ? 1.0 : 0.1 * h2);
  const double eta_max = sob ? 64.0 : 1.0;
  if (!prob.normalized) rebalance(s, prob.b, u);
  RunOutcome out;
  double F = decomposition_objective(prob, u);
  double ref = 0.0, gn = 0.0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    std::vector<GridField> G = decomposition_gradient(prob, u);
    project_sum_zero(G, s.mask);
    std::vector<GridField> cbar;
    double cc = 0.0;
    if (prob.normalized) {
      cbar = constraint_gradient(raw_fields(s, u));
      project_sum_zero(cbar, s.mask);
      cc = detail::dot(cbar, cbar);
      if (cc > 0) add_scaled(G, -detail::dot(G, cbar) / cc, cbar);
    }
    gn = std::sqrt(detail::dot(G, G));
    ref = std::max(ref, gn);
    if (gn <= opts.rel_tol * ref || gn == 0.0) {
      out.converged = true;
      break;
    }
    std::vector<GridField> d;
    for (const auto& gi : G) {
      GridField di = sob ? P.apply(gi) : gi;
      for (std::size_t k = 0; k < di.size(); ++k)
        if (!s.mask[k]) di.values[k] = 0.0;
      d.push_back(std::move(di));
    }
    project_sum_zero(d, s.mask);
    if (prob.normalized && cc > 0) add_scaled(d, -detail::dot(d, cbar) / cc, cbar);
    const double slope = detail::dot(G, d);
    if (!(slope > 0)) break;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<GridField> trial = shifted(u, -eta, d);
      bool ok = true;
      if (prob.normalized) ok = retract(s, trial);
      else rebalance(s, prob.b, trial);
      if (ok) {
        const double Ft = decomposition_objective(prob, trial);
        if (Ft <= F - 1e-4 * eta * slope) {
          u = std::move(trial);
          F = Ft;
          accepted = true;
          break;
        }
      }
      eta *= 0.5;
    }
    if (!accepted) {
      out.converged = gn <= 1e-3 * ref;
      break;
    }
    eta = std::min(2.0 * eta, eta_max);
  }
  out.u = std::move(u);
  out.value = F;
  out.iterations = it;
  out.grad_norm = gn;
  return out;
}

double max_pairwise(const std::vector<GridField>& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = i + 1; j < f.size(); ++j) m = std::max(m, l2_norm(detail::lincomb(1.0, f[i], -1.0, f[j])));
  return m;
}

double energy_value(const std::vector<GridField>& f, const std::vector<double>& b) {
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) v += 0.5 * b[i] * dirichlet_energy(f[i]);
  return v;
}

// Candidate feasibility: product matches g, and unit norms when normalized.
void check_candidate(const DecompositionProblem& prob, const DensityDecomposition& cand, int p) {
  require(cand.p() == p, "candidate decomposition has the wrong number of factors");
  double gmax = 0.0;
  for (double v : prob.g.values) gmax = std::max(gmax, v);
  for (std::size_t k = 0; k < prob.g.size(); ++k) {
    double prod = 1.0;
    for (const auto& f : cand.fields) prod *= f.values[k] * f.values[k];
    if (std::abs(prod - prob.g.values[k]) > 1e-6 * std::max(gmax, 1e-300))
      throw ValidationError("candidate decomposition does not reproduce the target density");
  }
  for (const auto& f : cand.fields) {
    check_same_grid(*f.grid, *prob.g.grid);
    require(vanishes_on_boundary(f, 1e-12), "candidate factor must vanish on the boundary");
    if (prob.normalized && std::abs(l2_norm(f) - 1.0) > 1e-6)
      throw ValidationError("candidate factor is not normalized");
  }
}

std::optional<std::vector<GridField>> candidate_to_u(const Support& s, const DensityDecomposition& cand) {
  const std::size_t p = cand.fields.size();
  std::vector<GridField> u(p, GridField(cand.fields.front().grid));
  for (std::size_t k = 0; k < s.mask.size(); ++k) {
    for (std::size_t i = 0; i < p; ++i) {
      const double v = cand.fields[i].values[k];
      if (s.mask[k]) {
        if (v == 0.0) return std::nullopt;
        u[i].values[k] = std::log(v * v / s.gp.values[k]);
      } else if (v != 0.0) {
        return std::nullopt;
      }
    }
  }
  project_sum_zero(u, s.mask);
  return u;
}

RateResult solve(const DecompositionProblem& prob, int p, const FlowOptions& opts,
                 const std::vector<DensityDecomposition>& candidates, bool symmetric_feasible) {
  const Support s = make_support(prob.g, p);
  const GridPtr& grid = prob.g.grid;
  struct Start {
    std::vector<GridField> u;
    int index;
  };
  std::vector<Start> starts;
  if (symmetric_feasible) starts.push_back({std::vector<GridField>(p, GridField(grid)), -1});

  RateResult best;
  best.value = RateValue::infinity("no feasible start");
  auto offer = [&](const std::vector<GridField>& fields, int index, int iters, double gnorm, bool conv) {
    const double v = energy_value(fields, prob.b);
    if (!best.value.is_finite() || v < best.value.value()) {
      best.value = RateValue::finite(v);
      best.minimizer.fields = fields;
      best.minimizer.weights = prob.b;
      best.iterations = iters;
      best.grad_norm = gnorm;
      best.converged = conv;
      best.restart_index = index;
      best.max_pairwise_distance = max_pairwise(fields);
    }
  };

  for (std::size_t j = 0; j < candidates.size(); ++j) {
    check_candidate(prob, candidates[j], p);
    std::vector<GridField> f;
    for (const auto& c : candidates[j].fields) {
      GridField a = c;
      for (double& v : a.values) v = std::abs(v);
      f.push_back(std::move(a));
    }
    offer(f, -2 - static_cast<int>(j), 0, 0.0, false);
    if (auto u = candidate_to_u(s, candidates[j])) starts.push_back({std::move(*u), -2 - static_cast<int>(j)});
  }
  for (int r = 0; r < opts.restarts; ++r) {
    std::vector<GridField> v;
    for (int i = 0; i < p; ++i) v.push_back(random_smooth_field(grid, opts.seed * 1000003ULL + 31ULL * r + i, 3));
    project_sum_zero(v, s.mask);
    if (prob.normalized && !symmetric_feasible) {
      // Scale the split until the normalization constraint is met.
      std::vector<GridField> u(p, GridField(grid));
      add_scaled(u, 1.0, v);
      if (!retract(s, u)) continue;
      starts.push_back({std::move(u), r});
    } else {
      starts.push_back({std::move(v), r});
      if (prob.normalized && !retract(s, starts.back().u)) starts.pop_back();
    }
  }

  for (auto& st : starts) {
    if (prob.normalized && !retract(s, st.u)) continue;
    RunOutcome run = descend(prob, s, st.u, opts);
    offer(decomposition_fields(prob, run.u).fields, st.index, run.iterations, run.grad_norm, run.converged);
  }
  return best;
}

GridField checked_density(const GridField& g) {
  for (double v : g.values) require(std::isfinite(v) && v >= 0.0, "target density must be finite and nonnegative");
  return g;
}

}  // namespace

double decomposition_objective(const DecompositionProblem& prob, const std::vector<GridField>& u) {
  const int p = static_cast<int>(u.size());
  const Support s = make_support(prob.g, p);
  const auto phi = raw_fields(s, u);
  double F = 0.0;
  for (int i = 0; i < p; ++i) {
    const double D = dirichlet_energy(phi[i]);
    F += 0.5 * prob.b[i] * (prob.normalized ? D / l2_inner(phi[i], phi[i]) : D);
  }
  return F;
}

std::vector<GridField> decomposition_gradient(const DecompositionProblem& prob, const std::vector<GridField>& u) {
  const int p = static_cast<int>(u.size());
  const Support s = make_support(prob.g, p);
  const auto phi = raw_fields(s, u);
  std::vector<GridField> G;
  for (int i = 0; i < p; ++i) {
    const GridField Kphi = neg_laplacian(phi[i]);
    GridField gi(prob.g.grid);
    const double N = l2_inner(phi[i], phi[i]);
    const double D = dirichlet_energy(phi[i]);
    for (std::size_t k = 0; k < gi.size(); ++k) {
      if (!s.mask[k]) continue;
      const double f = phi[i].values[k];
      gi.values[k] = prob.normalized ? 0.5 * prob.b[i] * (Kphi.values[k] * f / N - D * f * f / (N * N))
                                     : 0.5 * prob.b[i] * Kphi.values[k] * f;
    }
    G.push_back(std::move(gi));
  }
  return G;
}

DensityDecomposition decomposition_fields(const DecompositionProblem& prob, const std::vector<GridField>& u) {
  const int p = static_cast<int>(u.size());
  const Support s = make_support(prob.g, p);
  DensityDecomposition out;
  out.fields = raw_fields(s, u);
  out.weights = prob.b;
  if (prob.normalized) {
    // Equalize the norms: the product stays g because Σ log N_i = 0.
    for (auto& f : out.fields) detail::scale(f, 1.0 / l2_norm(f));
  }
  return out;
}

RateResult rate_I(const GridField& g0, const std::vector<double>& b, int p, const FlowOptions& opts,
                  const std::vector<DensityDecomposition>& candidates) {
  require(p >= 2, "rate_I: p must be at least 2");
  require(static_cast<int>(b.size()) == p, "rate_I: one weight per factor");
  for (double bi : b) require(bi > 0.0, "rate_I: weights must be positive");
  const GridField g = checked_density(g0);
  RateResult res;
  if (boundary_mass_ratio(measure_from_density(g)) > kBoundaryMassThreshold) {
    res.value = RateValue::infinity("density has mass at the boundary: not a product of H^1_0 factors");
    return res;
  }
  double H = 0.0;
  const auto& w = g.grid->node_weights();
  for (std::size_t k = 0; k < g.size(); ++k) H += w[k] * std::pow(g.values[k], 1.0 / p);
  if (!(H > 0.0)) {
    res.value = RateValue::infinity("zero density");
    return res;
  }
  if (H > 1.0 + 1e-9) {
    res.value = RateValue::infinity("integral of g^(1/p) exceeds 1: no normalized factors exist (Hoelder)");
    return res;
  }
  DecompositionProblem prob{g, b, true};
  return solve(prob, p, opts, candidates, std::abs(H - 1.0) <= 1e-9);
}

RateResult rate_I(const GridMeasure& mu, const std::vector<double>& b, int p, const FlowOptions& opts,
                  const std::vector<DensityDecomposition>& candidates) {
  return rate_I(density_from_measure(mu), b, p, opts, candidates);
}

RateResult rate_J(const GridField& g0, const CompactSubset& U, int p, const FlowOptions& opts,
                  const std::vector<DensityDecomposition>& candidates) {
  require(p >= 2, "rate_J: p must be at least 2");
  const GridField g = checked_density(g0);
  const auto mask = subset_node_mask(U, *g.grid);
  const auto& w = g.grid->node_weights();
  double mU = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (mask[k]) mU += w[k] * g.values[k];
  if (std::abs(mU - 1.0) > 1e-6)
    throw ValidationError("rate_J: measure restricted to U must have mass 1 (got " + std::to_string(mU) + ")");
  RateResult res;
  if (boundary_mass_ratio(measure_from_density(g)) > kBoundaryMassThreshold) {
    res.value = RateValue::infinity("density has mass at the boundary: not a product of H^1_0 factors");
    return res;
  }
  DecompositionProblem prob{g, std::vector<double>(p, 1.0), false};
  return solve(prob, p, opts, candidates, true);
}

RateResult rate_J(const GridMeasure& mu, const CompactSubset& U, int p, const FlowOptions& opts,
                  const std::vector<DensityDecomposition>& candidates) {
  return rate_J(density_from_measure(mu), U, p, opts, candidates);
}

}  // namespace islt
