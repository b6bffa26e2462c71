#include <cmath>
#include <numbers>

#include "doctest.h"
#include "islt/errors.hpp"
#include "islt/geometry.hpp"

using namespace islt;

namespace {

GridField sine_mode(const GridPtr& g, int a, int b) {
  return sample_field(g, [&](const Point& x) {
    return std::sin(a * std::numbers::pi * x[0]) * std::sin(b * std::numbers::pi * x[1]);
  });
}

}  // namespace

TEST_CASE("domain validation") {
  CHECK_NOTHROW(DomainSpec::unit_box(2, 5).validate());
  CHECK_NOTHROW(DomainSpec::unit_box(3, 2).validate());
  CHECK_THROWS_AS(DomainSpec::unit_box(3, 3).validate(), ValidationError);   // p(d-2) = d
  CHECK_THROWS_AS(DomainSpec::box(2, 1.0, 1.0).validate(), ValidationError);
  DomainSpec d = DomainSpec::unit_box(2);
  d.dim = 4;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  CHECK(DomainSpec::box(3, -1.0, 1.0).volume() == doctest::Approx(8.0));
  CHECK(DomainSpec::unit_box(2).contains({0.5, 0.5, 0.0}));
  CHECK_FALSE(DomainSpec::unit_box(2).contains({1.0, 0.5, 0.0}));
  CHECK(DomainSpec::unit_box(2).contains_closed({1.0, 0.5, 0.0}));
}

TEST_CASE("grid indexing round-trips and counts") {
  for (int d : {2, 3}) {
    const GridPtr g = make_grid(DomainSpec::unit_box(d), 6);
    CHECK(g->num_nodes() == static_cast<std::size_t>(std::pow(7, d)));
    CHECK(g->num_cells() == static_cast<std::size_t>(std::pow(6, d)));
    CHECK(g->num_interior() == static_cast<std::size_t>(std::pow(5, d)));
    for (std::size_t q = 0; q < g->num_nodes(); ++q) {
      const auto m = g->node_multi(q);
      CHECK(g->node_index(m[0], m[1], m[2]) == q);
    }
    for (std::size_t c = 0; c < g->num_cells(); ++c) CHECK(g->cell_of(g->cell_center(c)) == c);
  }
}

TEST_CASE("trapezoid weights integrate polynomials of degree one exactly") {
  const GridPtr g = make_grid(DomainSpec::box(3, -1.0, 2.0), 5);
  double sum = 0.0;
  for (double w : g->node_weights()) sum += w;
  CHECK(sum == doctest::Approx(27.0).epsilon(1e-13));
  const GridField f = sample_field(g, [](const Point& x) { return 1.0 + x[0] - 2.0 * x[2]; });
  // ∫ over [-1,2]^3 of 1 + x - 2z = 27 + 27·0.5 - 2·27·0.5
  CHECK(integrate(f) == doctest::Approx(27.0 * (1.0 + 0.5 - 1.0)).epsilon(1e-12));
}

TEST_CASE("discrete sine modes are eigenvectors of the FD Laplacian") {
  const int n = 24;
  const GridPtr g = make_grid(DomainSpec::unit_box(2), n);
  const double h = 1.0 / n;
  for (auto [a, b] : {std::pair{1, 1}, std::pair{2, 3}, std::pair{5, 1}}) {
    const GridField f = sine_mode(g, a, b);
    const double mu = 4.0 / (h * h) *
                      (std::pow(std::sin(a * std::numbers::pi * h / 2), 2) + std::pow(std::sin(b * std::numbers::pi * h / 2), 2));
    const GridField Kf = neg_laplacian(f);
    double worst = 0.0;
    for (std::size_t q = 0; q < f.size(); ++q) worst = std::max(worst, std::abs(Kf[q] - mu * f[q]));
    CHECK(worst < 1e-9 * mu);
    // D(f) = <f, K f> = mu ||f||²; the weighted norm of a full sine mode is exactly 1/4.
    CHECK(l2_inner(f, f) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(dirichlet_energy(f) == doctest::Approx(0.25 * mu).epsilon(1e-10));
  }
}

TEST_CASE("neg_laplacian is exact on quadratics and zero on the boundary") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 10);
  const GridField f = sample_field(g, [](const Point& x) { return x[0] * x[0] + 3.0 * x[1] * x[1]; });
  const GridField k = neg_laplacian(f);
  for (std::size_t q = 0; q < f.size(); ++q) {
    if (g->is_interior(q)) CHECK(k[q] == doctest::Approx(-8.0).epsilon(1e-9));
    else CHECK(k[q] == 0.0);
  }
}

TEST_CASE("multilinear interpolation reproduces multilinear functions") {
  const GridPtr g = make_grid(DomainSpec::box(3, 0.0, 2.0), 7);
  const GridField f = sample_field(g, [](const Point& x) { return 1.0 + x[0] - x[1] * x[2] + 0.5 * x[0] * x[1] * x[2]; });
  for (const Point& x : {Point{0.3, 1.1, 1.9}, Point{2.0, 0.0, 0.77}, Point{1.0, 1.0, 1.0}})
    CHECK(evaluate(f, x) == doctest::Approx(1.0 + x[0] - x[1] * x[2] + 0.5 * x[0] * x[1] * x[2]).epsilon(1e-12));
}

TEST_CASE("density and measure conversions preserve mass") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 12);
  const GridField f = sample_field(g, [](const Point& x) { return std::exp(x[0]) * (1.0 + x[1]); });
  CHECK(measure_from_density(f).total() == doctest::Approx(integrate(f)).epsilon(1e-13));
  GridMeasure mu(g);
  for (std::size_t c = 0; c < mu.masses.size(); ++c) mu.masses[c] = 1.0 + static_cast<double>(c % 5);
  CHECK(integrate(density_from_measure(mu)) == doctest::Approx(mu.total()).epsilon(1e-12));
  const GridMeasure coarse = restrict_measure(mu, make_grid(DomainSpec::unit_box(2), 4));
  CHECK(coarse.total() == doctest::Approx(mu.total()).epsilon(1e-13));
  CHECK_THROWS_AS(restrict_measure(mu, make_grid(DomainSpec::unit_box(2), 5)), ValidationError);
}

TEST_CASE("boundary mass ratio") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 8);
  GridMeasure uniform(g, std::vector<double>(g->num_cells(), 1.0));
  CHECK(boundary_mass_ratio(uniform) == doctest::Approx(1.0));
  GridMeasure inner(g);
  inner.masses[g->cell_index(4, 4)] = 1.0;
  CHECK(boundary_mass_ratio(inner) == 0.0);
}

TEST_CASE("compact subsets need a two-cell margin") {
  const Grid g(DomainSpec::unit_box(2), 16);
  CHECK(subset_admissible({{0.25, 0.25, 0}, {0.75, 0.75, 0}}, g));
  CHECK_FALSE(subset_admissible({{0.0625, 0.25, 0}, {0.75, 0.75, 0}}, g));
  CHECK(subset_admissible({{0.125, 0.125, 0}, {0.875, 0.875, 0}}, g));
  const auto mask = subset_node_mask({{0.25, 0.25, 0}, {0.75, 0.75, 0}}, g);
  std::size_t count = 0;
  for (auto m : mask) count += m;
  CHECK(count == 81);   // nodes 4..12 on each axis
  CHECK_THROWS_AS(subset_node_mask({{0.0, 0.2, 0}, {0.5, 0.5, 0}}, g), ValidationError);
}

TEST_CASE("fields on different grids are rejected") {
  const GridField a(make_grid(DomainSpec::unit_box(2), 8), 1.0);
  const GridField b(make_grid(DomainSpec::unit_box(2), 9), 1.0);
  CHECK_THROWS_AS(l2_inner(a, b), ValidationError);
}
