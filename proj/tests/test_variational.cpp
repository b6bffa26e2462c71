#include <cmath>
#include <functional>
#include <numbers>

#include "doctest.h"
#include "islt/errors.hpp"
#include "islt/spectral.hpp"
#include "islt/variational.hpp"

using namespace islt;

namespace {

constexpr double kPi = std::numbers::pi;

GridField sine_product(const GridPtr& g, int a, int b) {
  const DomainSpec& d = g->domain();
  return sample_field(g, [&](const Point& x) {
    const double u = (x[0] - d.lower[0]) / (d.upper[0] - d.lower[0]);
    const double v = (x[1] - d.lower[1]) / (d.upper[1] - d.lower[1]);
    return std::sin(a * kPi * u) * std::sin(b * kPi * v);
  });
}

GridField normalized(GridField f) {
  const double n = l2_norm(f);
  for (double& v : f.values) v /= n;
  return f;
}

GridField squared(const GridField& f) {
  GridField out = f;
  for (double& v : out.values) v *= v;
  return out;
}

GridField power(const GridField& f, double e) {
  GridField out = f;
  for (double& v : out.values) v = std::pow(std::abs(v), e);
  return out;
}

GridField positive_field(const GridPtr& g, std::uint64_t seed) {
  // Ground-state shape times a seeded positive modulation.
  const GridField r = random_smooth_field(g, seed, 3);
  const GridField s = sine_product(g, 1, 1);
  GridField out(g);
  const double m = std::max(1e-12, l2_norm(r));
  for (std::size_t q = 0; q < out.size(); ++q) out.values[q] = s[q] * std::exp(0.6 * r[q] / m);
  return out;
}

// Central difference of F along v, compared with <G, v>.
double fd_mismatch(const std::function<double(const GridField&)>& F, const GridField& x, const GridField& G,
                   const GridField& v) {
  const double h = 1e-5;
  GridField a = x, b = x;
  for (std::size_t q = 0; q < x.size(); ++q) {
    a.values[q] += h * v[q];
    b.values[q] -= h * v[q];
  }
  const double fd = (F(a) - F(b)) / (2 * h);
  const double an = l2_inner(G, v);
  return std::abs(fd - an) / std::max(std::abs(an), 1e-12);
}

}  // namespace

TEST_CASE("RateValue arithmetic and ordering") {
  const RateValue a = RateValue::finite(1.5), inf = RateValue::infinity("boundary");
  CHECK((a + a).value() == 3.0);
  CHECK_FALSE((a + inf).is_finite());
  CHECK((2.0 * a).value() == 3.0);
  CHECK_FALSE((2.0 * inf).is_finite());
  CHECK(a < inf);
  CHECK_FALSE(inf < a);
  CHECK(inf.value() == std::numeric_limits<double>::infinity());
  CHECK(inf.reason() == "boundary");
  CHECK(a == RateValue::finite(1.5));
}

TEST_CASE("Donsker-Varadhan rate of ground-state densities") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 128);
  const GridField p1 = normalized(sine_product(g, 1, 1));
  CHECK(dv_rate_density(squared(p1)).value() == doctest::Approx(kPi * kPi).epsilon(0.01));
  CHECK(dv_rate(measure_from_density(squared(p1))).value() == doctest::Approx(kPi * kPi).epsilon(0.01));
  const GridField p21 = normalized(sine_product(g, 2, 1));
  CHECK(dv_rate_density(squared(p21)).value() == doctest::Approx(2.5 * kPi * kPi).epsilon(0.015));
  const RateValue uni = dv_rate(GridMeasure(g, std::vector<double>(g->num_cells(), 1.0 / g->num_cells())));
  CHECK_FALSE(uni.is_finite());
  CHECK_FALSE(uni.reason().empty());
  CHECK_THROWS_AS(dv_rate(GridMeasure(g, std::vector<double>(g->num_cells(), 1.0))), ValidationError);
}

TEST_CASE("minimize_dv finds the ground state") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 128);
  const RateResult r = minimize_dv(g);
  CHECK(r.converged);
  CHECK(r.value.value() == doctest::Approx(kPi * kPi).epsilon(0.01));
  const GridField psi1 = normalized(sine_product(g, 1, 1));
  GridField diff = r.minimizer.fields.at(0);
  for (std::size_t q = 0; q < diff.size(); ++q) diff.values[q] -= psi1[q];
  CHECK(l2_norm(diff) < 0.02);
  // Self-consistency: the value recomputes from the returned field.
  CHECK(r.value.value() == doctest::Approx(rayleigh_value(r.minimizer.fields[0])).epsilon(1e-10));

  // Started on the orthogonal saddle ψ_(2,1), the seeded perturbation still leads to the ground state.
  const GridField saddle = sine_product(g, 2, 1);
  CHECK(minimize_dv(g, {}, &saddle).value.value() == doctest::Approx(kPi * kPi).epsilon(0.01));

  const GridPtr cube = make_grid(DomainSpec::unit_box(3), 32);
  CHECK(minimize_dv(cube).value.value() == doctest::Approx(1.5 * kPi * kPi).epsilon(0.02));
}

TEST_CASE("analytic gradients agree with finite differences") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 24);
  const CompactSubset U{{0.25, 0.25, 0}, {0.75, 0.75, 0}};
  const auto mask = subset_node_mask(U, *g);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GridField x = positive_field(g, 100 + s);
    const GridField v = random_smooth_field(g, 200 + s, 5);
    CHECK(fd_mismatch(rayleigh_value, x, rayleigh_gradient(x), v) < 1e-4);
    CHECK(fd_mismatch([&](const GridField& f) { return theta_quotient(f, mask, 2); }, x, theta_gradient(x, mask, 2), v) <
          1e-4);
    CHECK(fd_mismatch([](const GridField& f) { return chi_energy(f, 3); }, x, chi_gradient(x, 3), v) < 1e-4);

    for (bool normalized_problem : {true, false}) {
      const DecompositionProblem prob{squared(x), {1.0, 2.0}, normalized_problem};
      const std::vector<GridField> u{random_smooth_field(g, 300 + s, 3), random_smooth_field(g, 400 + s, 3)};
      const auto G = decomposition_gradient(prob, u);
      for (int i = 0; i < 2; ++i) {
        auto F = [&](const GridField& ui) {
          auto uu = u;
          uu[i] = ui;
          return decomposition_objective(prob, uu);
        };
        CHECK(fd_mismatch(F, u[i], G[i], v) < 1e-4);
      }
    }
  }
}

TEST_CASE("Theta scaling law and nested monotonicity") {
  const FlowOptions opts;
  const RateResult small = theta(make_grid(DomainSpec::box(2, 0.0, 1.0), 64), {{0.25, 0.25, 0}, {0.75, 0.75, 0}}, 2, opts);
  const RateResult large = theta(make_grid(DomainSpec::box(2, 0.0, 2.0), 64), {{0.5, 0.5, 0}, {1.5, 1.5, 0}}, 2, opts);
  REQUIRE(small.value.is_finite());
  CHECK(large.value.value() / small.value.value() == doctest::Approx(0.5).epsilon(0.02));

  const GridPtr g = make_grid(DomainSpec::unit_box(2), 32);
  double prev = 0.0;
  for (double half : {0.125, 0.1875, 0.25, 0.3125}) {
    const RateResult r = theta(g, {{0.5 - half, 0.5 - half, 0}, {0.5 + half, 0.5 + half, 0}}, 2);
    if (prev > 0.0) CHECK(r.value.value() < prev);
    prev = r.value.value();
    // Constraint ||1_U φ||_{2p} = 1 holds for the returned minimizer.
    const auto mask = subset_node_mask({{0.5 - half, 0.5 - half, 0}, {0.5 + half, 0.5 + half, 0}}, *g);
    double s = 0.0;
    for (std::size_t q = 0; q < mask.size(); ++q)
      if (mask[q]) s += g->node_weight(q) * std::pow(r.minimizer.fields[0][q], 4);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.value.value() == doctest::Approx(theta_quotient(r.minimizer.fields[0], mask, 2)).epsilon(1e-10));
  }
}

TEST_CASE("chi_B on a box of volume one is infeasible; on a larger box both norms hold") {
  CHECK_FALSE(chi_B(make_grid(DomainSpec::unit_box(2), 16), 2).value.is_finite());
  const RateResult r = chi_B(make_grid(DomainSpec::box(2, 0.0, 2.0), 32), 2);
  REQUIRE(r.value.is_finite());
  const GridField& psi = r.minimizer.fields[0];
  CHECK(l2_norm(psi) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(integrate(power(psi, 4)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.value.value() == doctest::Approx(chi_energy(psi, 2)).epsilon(1e-10));
  CHECK_THROWS_AS(chi_B(make_grid(DomainSpec::box(2, 0.0, 2.0), 16), 1), ValidationError);
}

TEST_CASE("J at the Theta minimizer equals Theta; J dominates Theta on random feasible measures") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 32);
  const CompactSubset U{{0.25, 0.25, 0}, {0.75, 0.75, 0}};
  const int p = 2;
  const RateResult th = theta(g, U, p);
  const GridField mu_star = power(th.minimizer.fields[0], 2.0 * p);
  const RateResult j = rate_J(mu_star, U, p);
  CHECK(j.value.value() == doctest::Approx(th.value.value()).epsilon(0.01));
  // The solver reports the energy of the tuple it returns.
  double e = 0.0;
  for (const auto& f : j.minimizer.fields) e += 0.5 * dirichlet_energy(f);
  CHECK(j.value.value() == doctest::Approx(e).epsilon(1e-10));

  const auto mask = subset_node_mask(U, *g);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GridField a = positive_field(g, 10 + s), b = positive_field(g, 20 + s);
    GridField dens(g);
    for (std::size_t q = 0; q < dens.size(); ++q) dens.values[q] = a[q] * a[q] * b[q] * b[q];
    double mU = 0.0;
    for (std::size_t q = 0; q < mask.size(); ++q)
      if (mask[q]) mU += g->node_weight(q) * dens[q];
    for (double& v : dens.values) v /= mU;
    const RateResult r = rate_J(dens, U, p);
    CHECK(r.value.value() >= th.value.value() - 1e-6);
    // Symmetric feasible point g^{1/2p} bounds the infimum.
    CHECK(r.value.value() <= 0.5 * p * dirichlet_energy(power(dens, 0.5 / p)) + 1e-6);
  }
  GridField off = mu_star;
  for (double& v : off.values) v *= 2.0;
  CHECK_THROWS_AS(rate_J(off, U, p), ValidationError);
}

TEST_CASE("rate_I stays below feasible decompositions") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 32);
  const GridField a = normalized(positive_field(g, 1)), b = normalized(positive_field(g, 2));
  GridField dens(g);
  for (std::size_t q = 0; q < dens.size(); ++q) dens.values[q] = a[q] * a[q] * b[q] * b[q];
  const double feasible = 0.5 * (dirichlet_energy(a) + dirichlet_energy(b));
  const RateResult r = rate_I(dens, {1.0, 1.0}, 2);
  REQUIRE(r.value.is_finite());
  CHECK(r.value.value() <= feasible + 1e-6);
  for (const auto& f : r.minimizer.fields) CHECK(l2_norm(f) == doctest::Approx(1.0).epsilon(1e-8));
  double e = 0.0;
  for (const auto& f : r.minimizer.fields) e += 0.5 * dirichlet_energy(f);
  CHECK(r.value.value() == doctest::Approx(e).epsilon(1e-10));
  // Supplying the feasible tuple as a candidate can only lower the result.
  const RateResult rc = rate_I(dens, {1.0, 1.0}, 2, {}, {DensityDecomposition{{a, b}, {1.0, 1.0}}});
  CHECK(rc.value.value() <= feasible + 1e-6);

  const GridField uniform(g, 1.0);
  CHECK_FALSE(rate_I(uniform, {1.0, 1.0}, 2).value.is_finite());
  CHECK_THROWS_AS(rate_I(dens, {1.0}, 2), ValidationError);
}

TEST_CASE("rate_I_full on compatible and incompatible tuples") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 64);
  const GridField psi1 = normalized(sine_product(g, 1, 1));
  const GridField psi2 = normalized(sine_product(g, 2, 1));
  const GridField d1 = squared(psi1);
  for (int p : {2, 3}) {
    const std::vector<GridField> gi(p, d1);
    const GridField mu = power(psi1, 2.0 * p);
    CHECK(rate_I_full(mu, gi, std::vector<double>(p, 1.0), 1e-8).value() == doctest::Approx(p * kPi * kPi).epsilon(0.01));
  }
  const GridField mu2 = power(psi1, 4.0);
  const double base = rate_I_full(mu2, {d1, d1}, {1.0, 1.0}, 1e-8).value();
  CHECK(rate_I_full(mu2, {d1, d1}, {2.0, 1.0}, 1e-8).value() == doctest::Approx(1.5 * base));
  CHECK_FALSE(rate_I_full(mu2, {squared(psi2), d1}, {1.0, 1.0}, 1e-8).is_finite());
  CHECK_THROWS_AS(rate_I_full(mu2, {d1, d1}, {1.0, 1.0}, 0.0), ValidationError);
}

TEST_CASE("smoothed rate recovers known inner fields") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 64);
  const MollifierSpec spec{2.0 / 64, MollifierProfile::bump};
  const GridField psi = normalized(sine_product(g, 1, 1));
  const GridField gi = convolve_density(squared(psi), spec);
  const GridField mu = intersection_density({gi, gi});
  const std::vector<GridField> cand{psi, psi};
  const EpsRate r = rate_I_eps(mu, {gi, gi}, {1.0, 1.0}, spec, 1e-6, &cand);
  CHECK(r.value.value() == doctest::Approx(dirichlet_energy(psi)).epsilon(0.01));
  // At the smallest resolvable width the smoothed rate is close to the unsmoothed one.
  const GridField d1 = squared(psi);
  CHECK(r.value.value() ==
        doctest::Approx(rate_I_full(intersection_density({d1, d1}), {d1, d1}, {1.0, 1.0}, 1e-8).value()).epsilon(0.03));
  const std::vector<GridField> wrong{normalized(sine_product(g, 2, 1)), psi};
  CHECK_FALSE(rate_I_eps(mu, {gi, gi}, {1.0, 1.0}, spec, 1e-6, &wrong).value.is_finite());
}

TEST_CASE("gamma probe: terminal closeness and monotonicity in the ball radius") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 64);
  const GridField d1 = squared(normalized(sine_product(g, 1, 1)));
  const double I = rate_I_full(intersection_density({d1, d1}), {d1, d1}, {1.0, 1.0}, 1e-8).value();
  const std::vector<double> deltas{0.2, 0.05, 0.01, 0.002};
  const auto rows = gamma_probe(intersection_density({d1, d1}), {d1, d1}, {1.0, 1.0}, {0.125, 0.0625, 2.0 / 64}, deltas);
  REQUIRE(rows.size() == 12);
  for (std::size_t e = 0; e < 3; ++e)
    for (std::size_t k = 1; k < deltas.size(); ++k) CHECK_FALSE(rows[4 * e + k].inf_value < rows[4 * e + k - 1].inf_value);
  const GammaRow& last = rows[4 * 2 + 1];
  REQUIRE(last.inf_value.is_finite());
  CHECK(last.inf_value.value() == doctest::Approx(I).epsilon(0.05));
}

TEST_CASE("tilted supremum against spectral oracles") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 24);
  const double lam1 = dirichlet_eigs(g, 1).eigenvalues[0];
  const GridField zero(g, 0.0);
  CHECK(tilted_sup(zero, {zero, zero}).value == doctest::Approx(-2.0 * lam1).epsilon(0.01));

  const GridField f1 = sample_field(g, [](const Point& x) { return 4.0 * x[0]; });
  const GridField f2 = sample_field(g, [](const Point& x) { return 3.0 * std::cos(5 * x[1]); });
  CHECK(tilted_sup(zero, {f1, f2}).value ==
        doctest::Approx(schroedinger_principal(g, f1) + schroedinger_principal(g, f2)).epsilon(0.01));

  // p = 1: the product term is linear, so the problem is one principal eigenvalue with f + f1.
  const GridField f = sample_field(g, [](const Point& x) { return 2.0 * std::sin(3 * x[0] * x[1]); });
  GridField sum = f;
  for (std::size_t q = 0; q < sum.size(); ++q) sum.values[q] += f1[q];
  CHECK(tilted_sup(f, {f1}).value == doctest::Approx(schroedinger_principal(g, sum)).epsilon(0.01));

  // f ≡ c > 0 with ψ_i = ψ₁ is a feasible point: the supremum is at least its value.
  const GridField c(g, 0.5);
  const GridField psi1 = dirichlet_eigs(g, 1).field(0);
  CHECK(tilted_sup(c, {zero, zero}).value >= tilted_objective(c, {zero, zero}, {psi1, psi1}) - 1e-9);
  CHECK(tilted_objective(c, {zero, zero}, {psi1, psi1}) ==
        doctest::Approx(-2.0 * lam1 + 0.5 * integrate(power(psi1, 4.0))).epsilon(1e-10));
}
