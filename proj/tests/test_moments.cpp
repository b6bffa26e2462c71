#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>

#include "doctest.h"
#include "islt/errors.hpp"
#include "islt/moments.hpp"
#include "islt/sine_transform.hpp"

using namespace islt;

namespace {

// Feynman-Kac oracle on the interior nodes: E_x[e^{θ∫g dℓ}; t < τ] = (e^{t(A + θG)} 1)(x) with
// A = ½Δ_h. The θ-derivatives come from the exponential of a block upper-triangular matrix.
struct FkMoments {
  double first = 0.0;    // E_x[∫g dℓ; t < τ]
  double second = 0.0;   // E_x[(∫g dℓ)²; t < τ]
};

FkMoments feynman_kac(const Grid& g, std::size_t x_node, double t, const std::vector<double>& gvals) {
  std::vector<std::size_t> interior;
  for (std::size_t q = 0; q < g.num_nodes(); ++q)
    if (g.is_interior(q)) interior.push_back(q);
  std::vector<long> pos(g.num_nodes(), -1);
  for (std::size_t i = 0; i < interior.size(); ++i) pos[interior[i]] = static_cast<long>(i);
  const long m = static_cast<long>(interior.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  for (long i = 0; i < m; ++i) {
    const auto c = g.node_multi(interior[i]);
    for (int a = 0; a < g.dim(); ++a) {
      const double k = 0.5 / (g.h(a) * g.h(a));
      for (int blk = 0; blk < 3; ++blk) B(blk * m + i, blk * m + i) -= 2.0 * k;
      for (int s : {-1, 1}) {
        auto nb = c;
        nb[a] += s;
        const long j = pos[g.node_index(nb[0], nb[1], nb[2])];
        if (j >= 0)
          for (int blk = 0; blk < 3; ++blk) B(blk * m + i, blk * m + j) += k;
      }
    }
    for (int blk = 0; blk < 2; ++blk) B(blk * m + i, (blk + 1) * m + i) = gvals[interior[i]];
  }
  const Eigen::MatrixXd E = (t * B).exp();
  const long r = pos[x_node];
  FkMoments out;
  out.first = E.block(0, m, m, m).row(r).sum();
  out.second = 2.0 * E.block(0, 2 * m, m, m).row(r).sum();
  return out;
}

double survival_at(const GridPtr& g, const Point& x, double t) {
  return evaluate(DirichletSemigroup(g).survival(t), x);
}

}  // namespace

TEST_CASE("expected occupation density matches the Feynman-Kac first derivative") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 12);
  const std::size_t xn = g->node_index(4, 7);
  const Point x = g->node_point(xn);
  const GridField gf = sample_field(g, [](const Point& z) { return 1.0 + std::sin(5 * z[0]) * z[1]; });
  for (double t : {0.05, 0.3}) {
    const OccupationDensity u = expected_occupation(g, x, t);
    double lhs = 0.0;
    for (std::size_t q = 0; q < g->num_nodes(); ++q) lhs += g->node_weight(q) * gf[q] * u.density[q];
    CHECK(lhs == doctest::Approx(feynman_kac(*g, xn, t, gf.values).first).epsilon(1e-8));
    // Total occupation: E_x[t ∧ τ; t < τ] = t·S_t(x).
    CHECK(integrate(u.density) == doctest::Approx(t * survival_at(g, x, t)).epsilon(1e-8));
    CHECK(u.error < 1e-8 * t);
  }
}

TEST_CASE("pair occupation density matches the Feynman-Kac second derivative") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 12);
  const std::size_t xn = g->node_index(3, 5);
  const Point x = g->node_point(xn);
  std::vector<std::size_t> interior;
  for (std::size_t q = 0; q < g->num_nodes(); ++q)
    if (g->is_interior(q)) interior.push_back(q);
  const double t = 0.3;
  const Eigen::MatrixXd Q = occupation_pair_density(g, x, t);
  REQUIRE(Q.rows() == static_cast<long>(interior.size()));
  CHECK((Q - Q.transpose()).cwiseAbs().maxCoeff() < 1e-12 * Q.cwiseAbs().maxCoeff());

  for (int which = 0; which < 3; ++which) {
    const GridField gf = sample_field(g, [which](const Point& z) {
      switch (which) {
        case 0: return 1.0;
        case 1: return std::cos(4 * z[0]) + 0.5 * z[1];
        default: return std::exp(-30 * ((z[0] - 0.7) * (z[0] - 0.7) + (z[1] - 0.3) * (z[1] - 0.3)));
      }
    });
    Eigen::VectorXd wg(interior.size());
    for (std::size_t i = 0; i < interior.size(); ++i) wg(i) = g->node_weight(interior[i]) * gf[interior[i]];
    const double lhs = wg.dot(Q * wg);
    CHECK(lhs == doctest::Approx(feynman_kac(*g, xn, t, gf.values).second).epsilon(1e-6));
    if (which == 0) CHECK(lhs == doctest::Approx(t * t * survival_at(g, x, t)).epsilon(1e-6));
  }
  // The 5-point rule agrees with the 8-point rule closely at this size.
  const Eigen::MatrixXd Q5 = occupation_pair_density(g, x, t, 5);
  CHECK((Q - Q5).cwiseAbs().maxCoeff() < 1e-3 * Q.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(occupation_pair_density(g, x, t, 4), ValidationError);
}

TEST_CASE("exact moments: properties") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 16);
  MomentProblem prob;
  prob.f = sample_field(g, [](const Point& z) { return 1.0 + z[0] * z[1]; });
  prob.t = 0.3;
  prob.spec = {0.2, MollifierProfile::bump};
  prob.starts = {{0.4, 0.5, 0.0}};

  // p = 1: smoothing then pairing equals the adjoint-weighted occupation.
  const MomentValue k1 = exact_moment_k1(prob);
  const OccupationDensity u = expected_occupation(g, prob.starts[0], prob.t);
  const GridMeasure mu = measure_from_density(u.density);
  const auto a = smoothing_adjoint(prob.f, prob.spec);
  double adj = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) adj += mu.masses[c] * a[c];
  CHECK(k1.value == doctest::Approx(adj).epsilon(1e-10));

  const MomentValue k2 = exact_moment_k2(prob);
  CHECK(k2.value >= k1.value * k1.value);
  CHECK(k2.error < 1e-3 * k2.value);

  // Two motions: exchangeable in their start points.
  MomentProblem two = prob;
  two.starts = {{0.4, 0.5, 0.0}, {0.6, 0.3, 0.0}};
  MomentProblem swapped = two;
  std::swap(swapped.starts[0], swapped.starts[1]);
  CHECK(exact_moment_k1(two).value == doctest::Approx(exact_moment_k1(swapped).value).epsilon(1e-12));
  CHECK(exact_moment_k2(two).value == doctest::Approx(exact_moment_k2(swapped).value).epsilon(1e-10));

  // Short horizons: the expected occupation is nearly all of t.
  MomentProblem short_t = prob;
  short_t.t = 1e-3;
  const OccupationDensity us = expected_occupation(g, prob.starts[0], short_t.t);
  CHECK(integrate(us.density) / short_t.t == doctest::Approx(1.0).epsilon(1e-3));

  MomentProblem bad = prob;
  bad.starts = {{1.2, 0.5, 0.0}};
  CHECK_THROWS_AS(exact_moment_k1(bad), ValidationError);
  bad = prob;
  bad.spec.eps = 0.05;   // below 2h
  CHECK_THROWS_AS(exact_moment_k1(bad), ValidationError);
  bad = prob;
  bad.fine_n = 24;
  CHECK_THROWS_AS(exact_moment_k1(bad), ValidationError);
}

TEST_CASE("refining the semigroup grid changes k1 only slightly") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 16);
  MomentProblem prob;
  prob.f = sample_field(g, [](const Point& z) { return std::sin(3 * z[0]) + z[1]; });
  prob.t = 0.3;
  prob.spec = {0.2, MollifierProfile::bump};
  prob.starts = {{0.5, 0.5, 0.0}};
  const double coarse = exact_moment_k1(prob).value;
  prob.fine_n = 64;
  CHECK(exact_moment_k1(prob).value == doctest::Approx(coarse).epsilon(0.02));
}

TEST_CASE("k2 refuses grids above the dense cost cap") {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 128);
  MomentProblem prob;
  prob.f = GridField(g, 1.0);
  prob.t = 0.3;
  prob.spec = {0.1, MollifierProfile::bump};
  prob.starts = {{0.5, 0.5, 0.0}};
  CHECK_THROWS_AS(exact_moment_k2(prob), NumericalError);
}

TEST_CASE("mc_moment statistics") {
  const McMoment m = mc_moment(1, {1.0, 2.0, 3.0, 4.0}, 4);
  CHECK(m.estimate == doctest::Approx(2.5));
  // The jackknife SE of a mean equals the sample SD over sqrt(n).
  CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const McMoment m2 = mc_moment(2, {0.0, 2.0, 0.0, 2.0}, 2);
  CHECK(m2.estimate == doctest::Approx(2.0));
  CHECK(m2.accepted == 2);
  CHECK(m2.sampled == 4);
  CHECK(mc_moment(1, {5.0}, 1).std_error == 0.0);
  CHECK_THROWS_AS(mc_moment(1, {}, 0), EmptyEnsembleError);
  CHECK_THROWS_AS(mc_moment(1, {0.0, 0.0}, 0), EmptyEnsembleError);
  CHECK_THROWS_AS(mc_moment(4, {1.0}, 1), ValidationError);
}

TEST_CASE("Monte Carlo moments agree with the exact values") {
  const DomainSpec dom = DomainSpec::unit_box(2, 2);
  const GridPtr g = make_grid(dom, 16);
  MomentProblem prob;
  prob.f = sample_field(g, [](const Point& z) { return 1.0 + z[0]; });
  prob.t = 0.2;
  prob.spec = {0.2, MollifierProfile::bump};
  prob.starts = {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}};
  PathConfig cfg;
  cfg.dt = 2e-4;
  cfg.t = prob.t;
  cfg.start.kind = StartKind::product_of_points;
  cfg.start.points = prob.starts;
  cfg.seed = 2024;
  std::size_t acc = 0;
  const auto values = mc_sample_values(prob.f, prob.spec, dom, cfg, 6000, 0, &acc);
  const McMoment m1 = mc_moment(1, values, acc), m2 = mc_moment(2, values, acc);
  CHECK(std::abs(m1.estimate - exact_moment_k1(prob).value) < 4.0 * m1.std_error);
  CHECK(std::abs(m2.estimate - exact_moment_k2(prob).value) < 4.0 * m2.std_error);

  // The ensemble form gives the same numbers as the streaming form.
  const Ensemble ens = survival_ensemble(dom, *g, cfg, 300, 0);
  std::vector<double> streamed = mc_sample_values(prob.f, prob.spec, dom, cfg, 300, 1);
  const McMoment a = mc_moment(1, prob.f, prob.spec, ens);
  double s = 0.0;
  for (double v : streamed) s += v;
  CHECK(a.estimate == doctest::Approx(s / 300).epsilon(1e-12));
}
