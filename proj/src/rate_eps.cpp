#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flow_util.hpp"
#include "islt/errors.hpp"
#include "islt/variational.hpp"

namespace islt {

namespace {

double max_abs(const GridField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

double rel_max_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values[k] - b.values[k]));
  return m / std::max(max_abs(b), 1e-300);
}

GridField sqrt_field(const GridField& g) {
  GridField out(g.grid);
  for (std::size_t k = 0; k < g.size(); ++k) out.values[k] = std::sqrt(std::max(g.values[k], 0.0));
  zero_boundary(out);
  return out;
}

GridField square_field(const GridField& f) {
  GridField out(f.grid);
  for (std::size_t k = 0; k < f.size(); ++k) out.values[k] = f.values[k] * f.values[k];
  return out;
}

void check_inputs(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b) {
  require(!gi.empty(), "need at least one component density");
  require(gi.size() == b.size(), "one weight per component");
  for (double bi : b) require(bi > 0.0 && std::isfinite(bi), "weights must be positive");
  for (const auto& f : gi) check_same_grid(*g.grid, *f.grid);
}

}  // namespace

RateValue rate_I_full(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b, double tol) {
  check_inputs(g, gi, b);
  require(tol > 0.0, "rate_I_full: compatibility tolerance must be positive");
  for (std::size_t i = 0; i < gi.size(); ++i) {
    if (boundary_mass_ratio(measure_from_density(gi[i])) > kBoundaryMassThreshold)
      return RateValue::infinity("component " + std::to_string(i) + " has mass at the boundary");
    const double mass = integrate(gi[i]);
    if (std::abs(mass - 1.0) > tol)
      return RateValue::infinity("component " + std::to_string(i) + " is not a probability density");
  }
  const GridField prod = intersection_density(gi);
  if (rel_max_diff(prod, g) > tol) return RateValue::infinity("product of components does not match the target");
  double v = 0.0;
  for (std::size_t i = 0; i < gi.size(); ++i) v += 0.5 * b[i] * dirichlet_energy(sqrt_field(gi[i]));
  return RateValue::finite(v);
}

RateValue rate_I_full(const GridMeasure& mu, const std::vector<GridMeasure>& mus, const std::vector<double>& b,
                      double tol) {
  std::vector<GridField> gi;
  for (const auto& m : mus) gi.push_back(density_from_measure(m));
  return rate_I_full(density_from_measure(mu), gi, b, tol);
}

GridField tikhonov_deconvolve(const GridField& g, const MollifierSpec& spec, double alpha) {
  require(alpha > 0.0, "tikhonov_deconvolve: alpha must be positive");
  check_resolvable(spec, *g.grid);
  // C is self-adjoint in the node-weighted inner product, so CG runs in that inner product.
  auto A = [&](const GridField& x) {
    GridField y = convolve_density(convolve_density(x, spec), spec);
    detail::axpy(alpha, x, y);
    return y;
  };
  const GridField rhs = convolve_density(g, spec);
  GridField x(g.grid);
  GridField r = rhs;
  GridField p = r;
  double rr = l2_inner(r, r);
  const double stop = 1e-24 * std::max(rr, 1e-300);
  for (int it = 0; it < 2000 && rr > stop; ++it) {
    const GridField Ap = A(p);
    const double a = rr / l2_inner(p, Ap);
    detail::axpy(a, p, x);
    detail::axpy(-a, Ap, r);
    const double rr_new = l2_inner(r, r);
    p = detail::lincomb(1.0, r, rr_new / rr, p);
    rr = rr_new;
  }
  return x;
}

EpsRate rate_I_eps(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b,
                   const MollifierSpec& spec, double tol, const std::vector<GridField>* candidate) {
  check_inputs(g, gi, b);
  require(tol > 0.0, "rate_I_eps: compatibility tolerance must be positive");
  check_resolvable(spec, *g.grid);
  EpsRate out;
  if (candidate) {
    require(candidate->size() == gi.size(), "rate_I_eps: candidate has the wrong number of fields");
    for (const auto& f : *candidate) {
      check_same_grid(*g.grid, *f.grid);
      require(vanishes_on_boundary(f, 1e-12), "rate_I_eps: candidate field must vanish on the boundary");
    }
    out.psi = *candidate;
  } else {
    for (const auto& f : gi) out.psi.push_back(sqrt_field(tikhonov_deconvolve(f, spec)));
  }
  std::ostringstream diag;
  bool ok = true;
  for (std::size_t i = 0; i < gi.size(); ++i) {
    const double norm2 = l2_inner(out.psi[i], out.psi[i]);
    if (std::abs(norm2 - 1.0) > tol) {
      ok = false;
      diag << "component " << i << ": inner field norm² " << norm2 << "; ";
    }
    const double res = rel_max_diff(convolve_density(square_field(out.psi[i]), spec), gi[i]);
    out.residual = std::max(out.residual, res);
    if (res > tol) {
      ok = false;
      diag << "component " << i << ": forward residual " << res << "; ";
    }
  }
  const double pres = rel_max_diff(intersection_density(gi), g);
  if (pres > tol) {
    ok = false;
    diag << "product residual " << pres << "; ";
  }
  out.diagnostic = diag.str();
  if (!ok) {
    out.value = RateValue::infinity(candidate ? "candidate fails forward verification: " + out.diagnostic
                                              : "deconvolution failed forward verification: " + out.diagnostic);
    return out;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < gi.size(); ++i) v += 0.5 * b[i] * dirichlet_energy(out.psi[i]);
  out.value = RateValue::finite(v);
  return out;
}

EpsRate rate_I_eps(const GridMeasure& mu, const std::vector<GridMeasure>& mus, const std::vector<double>& b,
                   const MollifierSpec& spec, double tol, const std::vector<GridField>* candidate) {
  std::vector<GridField> gi;
  for (const auto& m : mus) gi.push_back(density_from_measure(m));
  return rate_I_eps(density_from_measure(mu), gi, b, spec, tol, candidate);
}

double weak_distance(const std::vector<GridField>& a, const std::vector<GridField>& b) {
  require(a.size() == b.size() && !a.empty(), "weak_distance: tuples must have equal nonzero length");
  const Grid& grid = *a.front().grid;
  const int d = grid.dim();
  constexpr int kModes = 4;
  const double pi = std::numbers::pi;
  const DomainSpec& dom = grid.domain();
  double dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    check_same_grid(grid, *b[i].grid);
    const GridField diff = detail::lincomb(1.0, a[i], -1.0, b[i]);
    dist += std::abs(integrate(diff));
    const int kz = d == 3 ? kModes : 1;
    for (int k3 = 1; k3 <= kz; ++k3)
      for (int k2 = 1; k2 <= kModes; ++k2)
        for (int k1 = 1; k1 <= kModes; ++k1) {
          const std::array<int, 3> k{k1, k2, d == 3 ? k3 : 0};
          const GridField mode = sample_field(a.front().grid, [&](const Point& x) {
            double v = 1.0;
            for (int ax = 0; ax < d; ++ax)
              v *= std::sin(k[ax] * pi * (x[ax] - dom.lower[ax]) / (dom.upper[ax] - dom.lower[ax]));
            return v;
          });
          const int order = k1 + k2 + (d == 3 ? k3 : 0) - d;
          dist += std::ldexp(1.0, -order) * std::abs(l2_inner(diff, mode));
        }
  }
  return dist;
}

namespace {

// Ramp from 0 at the boundary to 1 at distance w, smooth in between.
GridField cutoff(const GridPtr& grid, double w) {
  const DomainSpec& dom = grid->domain();
  const int d = grid->dim();
  return sample_field(grid, [&](const Point& x) {
    double v = 1.0;
    for (int a = 0; a < d; ++a) {
      const double dist = std::min(x[a] - dom.lower[a], dom.upper[a] - x[a]);
      const double s = std::clamp(dist / w, 0.0, 1.0);
      v *= s * s * (3.0 - 2.0 * s);
    }
    return v;
  });
}

}  // namespace

std::vector<GammaRow> gamma_probe(const GridField& g, const std::vector<GridField>& gi, const std::vector<double>& b,
                                  const std::vector<double>& eps_list, const std::vector<double>& delta_list,
                                  std::uint64_t seed, MollifierProfile profile) {
  check_inputs(g, gi, b);
  require(!eps_list.empty() && !delta_list.empty(), "gamma_probe: empty eps or delta list");
  const GridPtr& grid = g.grid;
  const std::size_t p = gi.size();
  std::vector<GridField> base;
  for (const auto& f : gi) base.push_back(sqrt_field(f));
  std::vector<GridField> noise;
  for (std::size_t i = 0; i < p; ++i) noise.push_back(random_smooth_field(grid, seed * 7919ULL + i, 4));
  const std::vector<double> amplitudes{0.0, 0.02, -0.02, 0.05, -0.05, 0.1, -0.1};

  std::vector<GammaRow> rows;
  for (double eps : eps_list) {
    const MollifierSpec spec{eps, profile};
    check_resolvable(spec, *grid);
    struct Member {
      double value;
      double dist;
    };
    std::vector<Member> members;
    std::vector<double> widths{0.0};
    for (double m : {1.0, 2.0, 4.0})
      if (m * eps >= 2.0 * grid->max_h()) widths.push_back(m * eps);
    for (double w : widths) {
      const GridField chi = w > 0 ? cutoff(grid, w) : GridField(grid, 1.0);
      for (double s : amplitudes) {
        std::vector<GridField> psi, smoothed;
        double value = 0.0;
        bool valid = true;
        for (std::size_t i = 0; i < p; ++i) {
          GridField f(grid);
          for (std::size_t k = 0; k < f.size(); ++k)
            f.values[k] = std::abs(base[i].values[k] * chi.values[k] + s * noise[i].values[k]);
          zero_boundary(f);
          const double nrm = l2_norm(f);
          if (!(nrm > 0)) {
            valid = false;
            break;
          }
          detail::scale(f, 1.0 / nrm);
          value += 0.5 * b[i] * dirichlet_energy(f);
          smoothed.push_back(convolve_density(square_field(f), spec));
        }
        if (valid) members.push_back({value, weak_distance(smoothed, gi)});
      }
    }
    for (double delta : delta_list) {
      GammaRow row;
      row.eps = eps;
      row.delta = delta;
      row.inf_value = RateValue::infinity("no family member within the weak ball");
      for (const auto& m : members) {
        if (m.dist > delta) continue;
        ++row.members_in_ball;
        if (!row.inf_value.is_finite() || m.value < row.inf_value.value()) row.inf_value = RateValue::finite(m.value);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace islt
