#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "islt/errors.hpp"
#include "islt/sine_transform.hpp"
#include "islt/spectral.hpp"

using namespace islt;

namespace {

constexpr double kPi = std::numbers::pi;

// Dense -½Δ_h on interior nodes (uniform cubic grid), built independently of the library.
Eigen::MatrixXd dense_generator(const Grid& g, std::vector<std::size_t>& interior) {
  interior.clear();
  for (std::size_t q = 0; q < g.num_nodes(); ++q)
    if (g.is_interior(q)) interior.push_back(q);
  std::vector<long> pos(g.num_nodes(), -1);
  for (std::size_t i = 0; i < interior.size(); ++i) pos[interior[i]] = static_cast<long>(i);
  const long m = static_cast<long>(interior.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  for (long i = 0; i < m; ++i) {
    const auto c = g.node_multi(interior[i]);
    for (int a = 0; a < g.dim(); ++a) {
      const double k = 0.5 / (g.h(a) * g.h(a));
      H(i, i) += 2.0 * k;
      for (int s : {-1, 1}) {
        auto nb = c;
        nb[a] += s;
        const long j = pos[g.node_index(nb[0], nb[1], nb[2])];
        if (j >= 0) H(i, j) -= k;
      }
    }
  }
  return H;
}

}  // namespace

TEST_CASE("first ten eigenvalues on the unit square") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 128);
  const SpectralBasis b = dirichlet_eigs(g, 10);
  const int sums[10] = {2, 5, 5, 8, 10, 10, 13, 13, 17, 17};
  const double h = 1.0 / 128;
  for (int q = 0; q < 10; ++q) {
    CHECK(std::abs(b.eigenvalues[q] / (0.5 * kPi * kPi * sums[q]) - 1.0) < 0.005);
    const auto m = b.modes[q];
    const double fd = 2.0 / (h * h) *
                      (std::pow(std::sin(m[0] * kPi * h / 2), 2) + std::pow(std::sin(m[1] * kPi * h / 2), 2));
    CHECK(b.eigenvalues[q] == doctest::Approx(fd).epsilon(1e-12));
  }
}

TEST_CASE("eigenbasis matches a dense symmetric solve and is orthonormal") {
  for (int d : {2, 3}) {
    const GridPtr g = make_grid(DomainSpec::box(d, 0.0, 1.5), d == 2 ? 10 : 6);
    std::vector<std::size_t> interior;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_generator(*g, interior));
    const int count = 12;
    const SpectralBasis b = dirichlet_eigs(g, count);
    for (int q = 0; q < count; ++q) CHECK(b.eigenvalues[q] == doctest::Approx(es.eigenvalues()(q)).epsilon(1e-10));
    const auto& w = g->node_weights();
    for (int i = 0; i < count; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < g->num_nodes(); ++q) s += w[q] * b.fields(q, i) * b.fields(q, j);
        CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
      }
  }
}

TEST_CASE("sine transform round trip and semigroup action on a mode") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 20);
  const SineTransform dst(g);
  const GridField f = sample_field(g, [](const Point& x) { return x[0] * (1 - x[0]) * std::exp(x[1]) * x[1] * (1 - x[1]); });
  const GridField back = dst.synthesize(dst.analyze(f));
  for (std::size_t q = 0; q < f.size(); ++q) CHECK(back[q] == doctest::Approx(f[q]).epsilon(1e-12).scale(1.0));

  const SpectralBasis b = dirichlet_eigs(g, 3);
  const DirichletSemigroup sg(g);
  const GridField psi = b.field(2);
  const GridField out = sg.heat(0.07, psi);
  for (std::size_t q = 0; q < f.size(); ++q)
    CHECK(out[q] == doctest::Approx(std::exp(-0.07 * b.eigenvalues[2]) * psi[q]).scale(1.0).epsilon(1e-12));
  const GridField s0 = sg.survival(0.0);
  for (std::size_t q = 0; q < f.size(); ++q) CHECK(s0[q] == doctest::Approx(g->is_interior(q) ? 1.0 : 0.0));
}

TEST_CASE("transition density: mass, symmetry and Chapman-Kolmogorov with the full basis") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 10);
  const SpectralBasis b = dirichlet_eigs(g, static_cast<int>(g->num_interior()));
  const Point x = g->node_point(g->node_index(3, 4));
  const Point y = g->node_point(g->node_index(6, 2));
  CHECK(transition_density(b, 0.03, x, y).value == doctest::Approx(transition_density(b, 0.03, y, x).value));

  double mass = 0.0, ck = 0.0;
  for (std::size_t q = 0; q < g->num_nodes(); ++q) {
    if (!g->is_interior(q)) continue;
    const Point z = g->node_point(q);
    const double pxz = transition_density(b, 0.02, x, z).value;
    mass += g->node_weight(q) * transition_density(b, 0.05, x, z).value;
    ck += g->node_weight(q) * pxz * transition_density(b, 0.03, z, y).value;
  }
  CHECK(mass == doctest::Approx(evaluate(DirichletSemigroup(g).survival(0.05), x)).epsilon(1e-10));
  CHECK(ck == doctest::Approx(transition_density(b, 0.05, x, y).value).epsilon(1e-10));
}

TEST_CASE("Green function splits into truncated part and complement") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 16);
  const SpectralBasis b = dirichlet_eigs(g, 60);
  const Point x{0.3, 0.4, 0}, y{0.6, 0.55, 0};
  const double total = green_function(b, x, y).value;
  for (double delta : {0.001, 0.01, 0.1})
    CHECK(truncated_green(b, delta, x, y).value + green_complement(b, delta, x, y).value ==
          doctest::Approx(total).epsilon(1e-12));
  CHECK(green_function(b, y, x).value == doctest::Approx(total));
  CHECK(total > 0.0);
}

TEST_CASE("Weyl slope of synthetic power laws") {
  std::vector<double> lam;
  for (int q = 1; q <= 300; ++q) lam.push_back(3.0 * std::pow(q, 2.0 / 3.0));
  CHECK(weyl_slope(lam, 20, 200) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(weyl_slope(lam, 200, 20), ValidationError);
}

TEST_CASE("principal eigenvalue of 1/2 Δ + f") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 12);
  const SpectralBasis b = dirichlet_eigs(g, 1);
  CHECK(schroedinger_principal(g, GridField(g, 0.7)) == doctest::Approx(-b.eigenvalues[0] + 0.7).epsilon(1e-9));

  const GridField f = sample_field(g, [](const Point& x) { return 3.0 * std::exp(-20.0 * ((x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.6) * (x[1] - 0.6))); });
  std::vector<std::size_t> interior;
  Eigen::MatrixXd H = dense_generator(*g, interior);
  for (std::size_t i = 0; i < interior.size(); ++i) H(i, i) -= f[interior[i]];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const PrincipalPair pp = schroedinger_ground_state(g, f);
  CHECK(pp.value == doctest::Approx(-es.eigenvalues()(0)).epsilon(1e-8));
  CHECK(l2_norm(pp.field) == doctest::Approx(1.0).epsilon(1e-10));
  for (double v : pp.field.values) CHECK(v >= 0.0);
}

TEST_CASE("basis cache round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "islt_spectral_cache_test";
  fs::remove_all(dir);
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 12);
  bool hit = true;
  const SpectralBasis a = cached_dirichlet_eigs(dir.string(), g, 15, &hit);
  CHECK_FALSE(hit);
  const SpectralBasis b = cached_dirichlet_eigs(dir.string(), g, 15, &hit);
  CHECK(hit);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.fields == b.fields);
  CHECK(a.modes == b.modes);
  // A different mode count or grid is a different key.
  CHECK(basis_hash(*g, 15) != basis_hash(*g, 16));
  CHECK(basis_hash(*g, 15) != basis_hash(Grid(DomainSpec::unit_box(2), 13), 15));
  // A truncated file is rejected rather than misread.
  for (const auto& e : fs::directory_iterator(dir)) fs::resize_file(e.path(), 64);
  CHECK_FALSE(load_basis((*fs::directory_iterator(dir)).path().string(), g, 15).has_value());
  fs::remove_all(dir);
}

TEST_CASE("mode count bounds") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 4);
  CHECK_THROWS_AS(dirichlet_eigs(g, 10), ValidationError);
  CHECK_THROWS_AS(dirichlet_eigs(g, 0), ValidationError);
}
