#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "islt/errors.hpp"
#include "islt/moments.hpp"
#include "islt/sine_transform.hpp"

namespace islt {

namespace {

struct Rule {
  std::vector<double> x;   // on [-1, 1]
  std::vector<double> w;
};

template <class Abs, class W>
Rule expand(const Abs& a, const W& w) {
  Rule r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    r.x.push_back(a[i]);
    r.w.push_back(w[i]);
    if (a[i] != 0.0) {
      r.x.push_back(-a[i]);
      r.w.push_back(w[i]);
    }
  }
  return r;
}

// Breakpoints refined geometrically (ratio 4) toward both ends of [0, t].
std::vector<double> graded_breaks(double t, double smallest, int right_levels) {
  std::vector<double> b{0.0};
  std::vector<double> left;
  for (double r = 0.5 * t; r > smallest; r *= 0.25) left.push_back(r);
  left.push_back(left.empty() ? 0.5 * t : left.back() * 0.25);
  std::sort(left.begin(), left.end());
  b.insert(b.end(), left.begin(), left.end());
  double gap = 0.125 * t;
  std::vector<double> right;
  for (int l = 0; l < right_levels; ++l, gap *= 0.25) right.push_back(t - gap);
  b.insert(b.end(), right.begin(), right.end());
  b.push_back(t);
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

double weighted_l1(const std::vector<double>& v, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += w[k] * std::abs(v[k]);
  return s;
}

}  // namespace

OccupationDensity expected_occupation(const GridPtr& grid, const Point& x, double t, double rel_tol) {
  require(t > 0.0 && std::isfinite(t), "expected_occupation: t must be positive");
  require(grid->domain().contains(x), "expected_occupation: start point outside the domain");
  const SineTransform dst(grid);
  const DirichletSemigroup sg(grid);
  const std::vector<double> c_hat = dst.analyze(sg.point_source(x));
  GridField one(grid, 1.0);
  zero_boundary(one);
  const std::vector<double> s_hat = dst.analyze(one);
  const auto& lam = dst.eigenvalues();
  const std::size_t nn = grid->num_nodes();

  auto integrand = [&](double r) {
    std::vector<double> a(c_hat.size()), b(s_hat.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = c_hat[k] * std::exp(-r * lam[k]);
      b[k] = s_hat[k] * std::exp(-(t - r) * lam[k]);
    }
    GridField pa = dst.synthesize(a);
    const GridField sb = dst.synthesize(b);
    for (std::size_t z = 0; z < nn; ++z) pa.values[z] *= sb.values[z];
    return pa.values;
  };

  const Rule kr = expand(boost::math::quadrature::gauss_kronrod<double, 15>::abscissa(),
                         boost::math::quadrature::gauss_kronrod<double, 15>::weights());
  const auto gw = boost::math::quadrature::gauss<double, 7>::weights();
  // Embedded Gauss nodes sit at the even Kronrod abscissae.
  std::vector<double> gauss_w(kr.x.size(), 0.0);
  {
    std::size_t slot = 0;
    const auto ka = boost::math::quadrature::gauss_kronrod<double, 15>::abscissa();
    for (std::size_t i = 0; i < ka.size(); ++i) {
      const double g = i % 2 == 0 ? gw[i / 2] : 0.0;
      gauss_w[slot++] = g;
      if (ka[i] != 0.0) gauss_w[slot++] = g;
    }
  }

  const auto& wts = grid->node_weights();
  struct Panel {
    double a, b, err;
    std::vector<double> value;
    bool operator<(const Panel& o) const { return err < o.err; }
  };
  auto eval = [&](double a, double b) {
    Panel p{a, b, 0.0, std::vector<double>(nn, 0.0)};
    std::vector<double> g(nn, 0.0);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < kr.x.size(); ++q) {
      const auto v = integrand(mid + half * kr.x[q]);
      for (std::size_t z = 0; z < nn; ++z) {
        p.value[z] += half * kr.w[q] * v[z];
        g[z] += half * gauss_w[q] * v[z];
      }
    }
    for (std::size_t z = 0; z < nn; ++z) g[z] -= p.value[z];
    p.err = weighted_l1(g, wts);
    return p;
  };

  const double hmin = grid->min_h();
  const auto breaks = graded_breaks(t, 0.05 * hmin * hmin, 4);
  std::priority_queue<Panel> heap;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    Panel p = eval(breaks[i], breaks[i + 1]);
    total_err += p.err;
    heap.push(std::move(p));
  }
  // t·S_t(x) bounds the L¹ mass of the integral from above by t.
  const double scale = t;
  constexpr int kMaxPanels = 4000;
  while (total_err > rel_tol * scale && static_cast<int>(heap.size()) < kMaxPanels) {
    Panel worst = heap.top();
    heap.pop();
    total_err -= worst.err;
    const double mid = 0.5 * (worst.a + worst.b);
    Panel l = eval(worst.a, mid), r = eval(mid, worst.b);
    total_err += l.err + r.err;
    heap.push(std::move(l));
    heap.push(std::move(r));
  }
  if (total_err > rel_tol * scale)
    throw NumericalError("expected_occupation: quadrature error " + std::to_string(total_err) +
                         " above tolerance after the panel cap");
  OccupationDensity out{GridField(grid), std::max(total_err, 0.0), static_cast<int>(heap.size())};
  while (!heap.empty()) {
    const Panel& p = heap.top();
    for (std::size_t z = 0; z < nn; ++z) out.density.values[z] += p.value[z];
    heap.pop();
  }
  zero_boundary(out.density);
  return out;
}

GridField expected_smoothed_occupation(const MomentProblem& prob, const Point& x, double rel_tol, double* error) {
  const GridPtr& coarse = prob.f.grid;
  GridPtr fine = coarse;
  if (prob.fine_n > 0 && prob.fine_n != coarse->n()) {
    require(prob.fine_n % coarse->n() == 0, "fine_n must be a multiple of the occupation grid resolution");
    fine = make_grid(coarse->domain(), prob.fine_n);
  }
  const OccupationDensity u = expected_occupation(fine, x, prob.t, rel_tol);
  if (error) *error = u.error;
  GridMeasure mu = measure_from_density(u.density);
  if (fine != coarse) mu = restrict_measure(mu, coarse);
  return smooth_occupation(mu, prob.spec).field;
}

namespace {

void check_problem(const MomentProblem& prob) {
  require(prob.f.grid != nullptr, "moment problem needs a test function");
  require(prob.t > 0.0 && std::isfinite(prob.t), "moment horizon must be positive");
  require(!prob.starts.empty(), "moment problem needs one start point per motion");
  for (const Point& x : prob.starts) require(prob.f.grid->domain().contains(x), "start point outside the domain");
  for (double v : prob.f.values) require(std::isfinite(v), "test function must be finite");
  check_resolvable(prob.spec, *prob.f.grid);
}

}  // namespace

MomentValue exact_moment_k1(const MomentProblem& prob, double rel_tol) {
  check_problem(prob);
  std::vector<GridField> v;
  double rel_err = 0.0;
  for (const Point& x : prob.starts) {
    double err = 0.0;
    v.push_back(expected_smoothed_occupation(prob, x, rel_tol, &err));
    rel_err += err / prob.t;
  }
  MomentValue out;
  out.value = test_integral(intersection_density(v), prob.f);
  // Each factor carries a relative L¹ error; the product propagates their sum.
  out.error = rel_err * std::abs(out.value);
  return out;
}

namespace {

// Separable orthonormal sine basis on interior nodes: Ψ = S ⊗ S (⊗ S), x fastest.
class SeparableBasis {
public:
  explicit SeparableBasis(const GridPtr& grid) : d_(grid->dim()), m_(grid->n() - 1) {
    const int n = grid->n();
    const double L = grid->domain().upper[0] - grid->domain().lower[0];
    for (int a = 1; a < d_; ++a)
      require(std::abs(grid->domain().upper[a] - grid->domain().lower[a] - L) < 1e-12 * L,
              "pair density needs a cubic box");
    S_.resize(m_, m_);
    for (int i = 1; i <= m_; ++i)
      for (int a = 1; a <= m_; ++a) S_(i - 1, a - 1) = std::sqrt(2.0 / L) * std::sin(a * std::numbers::pi * i / n);
    const double h = L / n;
    std::vector<double> mu(m_);
    for (int a = 1; a <= m_; ++a) {
      const double s = std::sin(a * std::numbers::pi / (2.0 * n));
      mu[a - 1] = 4.0 * s * s / (h * h);
    }
    size_ = d_ == 3 ? std::size_t(m_) * m_ * m_ : std::size_t(m_) * m_;
    lambda_.resize(size_);
    for (std::size_t q = 0; q < size_; ++q) {
      const int i = static_cast<int>(q % m_), j = static_cast<int>((q / m_) % m_), k = static_cast<int>(q / m_ / m_);
      lambda_(q) = 0.5 * (mu[i] + mu[j] + (d_ == 3 ? mu[k] : 0.0));
    }
  }

  std::size_t size() const { return size_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }

  // Ψ X for each column of X.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    const Eigen::Index cols = X.cols();
    const Eigen::Index m = m_;
    // Axis 0 (fastest): one GEMM over the reshaped block.
    Eigen::MatrixXd Y = S_ * Eigen::Map<const Eigen::MatrixXd>(X.data(), m, X.size() / m);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(size_), cols);
    if (d_ == 2) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Map<const Eigen::MatrixXd> blk(Y.data() + c * m * m, m, m);
        Eigen::Map<Eigen::MatrixXd>(out.data() + c * m * m, m, m).noalias() = blk * S_.transpose();
      }
    } else {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double* base = Y.data() + c * m * m * m;
        for (Eigen::Index k = 0; k < m; ++k) {
          Eigen::Map<Eigen::MatrixXd> slab(base + k * m * m, m, m);
          slab = (slab * S_.transpose()).eval();
        }
        Eigen::Map<const Eigen::MatrixXd> flat(base, m * m, m);
        Eigen::Map<Eigen::MatrixXd>(out.data() + c * m * m * m, m * m, m).noalias() = flat * S_.transpose();
      }
    }
    return out;
  }

  Eigen::MatrixXd dense() const { return apply(Eigen::MatrixXd::Identity(size_, size_)); }

private:
  int d_, m_;
  std::size_t size_ = 0;
  Eigen::MatrixXd S_;
  Eigen::VectorXd lambda_;
};

// ∫₀^τ e^{-uλk} e^{-(τ-u)λl} du, evaluated without overflow.
double divided_exp(double tau, double lk, double ll) {
  const double lo = std::min(lk, ll), hi = std::max(lk, ll);
  const double gap = hi - lo;
  if (gap * tau < 1e-12) return tau * std::exp(-tau * lo);
  return std::exp(-tau * lo) * (-std::expm1(-tau * gap)) / gap;
}

std::vector<std::size_t> interior_list(const Grid& g) {
  std::vector<std::size_t> nodes;
  const int m = g.n() - 1;
  const int kmax = g.dim() == 3 ? m : 1;
  for (int k = 1; k <= kmax; ++k)
    for (int j = 1; j <= m; ++j)
      for (int i = 1; i <= m; ++i) nodes.push_back(g.node_index(i, j, g.dim() == 3 ? k : 0));
  return nodes;
}

struct PairQuadrature {
  Eigen::MatrixXd q8, q5;
};

PairQuadrature pair_density_rules(const GridPtr& grid, const Point& x, double t) {
  const Grid& g = *grid;
  const SeparableBasis basis(grid);
  const std::size_t m = basis.size();
  const Eigen::MatrixXd Psi = basis.dense();
  const auto nodes = interior_list(g);
  std::vector<long> slot(g.num_nodes(), -1);
  for (std::size_t q = 0; q < nodes.size(); ++q) slot[nodes[q]] = static_cast<long>(q);
  const double vol = g.cell_volume();

  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  {
    std::array<std::size_t, 8> st{};
    std::array<double, 8> w{};
    const int cnt = g.interpolation_stencil(x, st, w);
    for (int a = 0; a < cnt; ++a)
      if (slot[st[a]] >= 0) c += w[a] * Psi.row(slot[st[a]]).transpose();
  }
  const Eigen::VectorXd dvec = vol * Psi.colwise().sum().transpose();
  const Eigen::VectorXd& lam = basis.lambda();

  auto alpha = [&](double r) {
    Eigen::VectorXd coeff = (c.array() * (-r * lam.array()).exp()).matrix();
    return Eigen::VectorXd(basis.apply(coeff));
  };
  // Y(τ)_{z1 z2} = ∫₀^τ p_u(z1, z2) S_{τ-u}(z2) du, exact in time.
  auto Y = [&](double tau) {
    // D(l, k) = d_l ∫₀^τ e^{-uλk} e^{-(τ-u)λl} du, so V(z2, k) = Σ_l ψ_l(z2) D(l, k).
    Eigen::MatrixXd D(m, m);
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t l = 0; l < m; ++l) D(l, k) = dvec(l) * divided_exp(tau, lam(k), lam(l));
    const Eigen::MatrixXd V = basis.apply(D);
    const Eigen::MatrixXd Z = Psi.cwiseProduct(V).transpose();   // (k, z2)
    return basis.apply(Z);
  };

  const Rule g8 = expand(boost::math::quadrature::gauss<double, 8>::abscissa(),
                         boost::math::quadrature::gauss<double, 8>::weights());
  const Rule g5 = expand(boost::math::quadrature::gauss<double, 5>::abscissa(),
                         boost::math::quadrature::gauss<double, 5>::weights());
  const auto breaks = graded_breaks(t, 0.125 * g.min_h() * g.min_h(), 3);
  PairQuadrature out{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m)};
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p], b = breaks[p + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (const auto* rule : {&g8, &g5}) {
      Eigen::MatrixXd& acc = rule == &g8 ? out.q8 : out.q5;
      for (std::size_t q = 0; q < rule->x.size(); ++q) {
        const double r = mid + half * rule->x[q];
        acc.noalias() += (half * rule->w[q]) * (alpha(r).asDiagonal() * Y(t - r));
      }
    }
  }
  out.q8 = (out.q8 + out.q8.transpose()).eval();
  out.q5 = (out.q5 + out.q5.transpose()).eval();
  return out;
}

// Node-density to smoothed-node-field map (all nodes × interior nodes).
Eigen::MatrixXd smoothing_matrix(const GridPtr& grid, const MollifierSpec& spec) {
  const auto nodes = interior_list(*grid);
  Eigen::MatrixXd L(grid->num_nodes(), nodes.size());
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    GridField e(grid);
    e.values[nodes[q]] = 1.0;
    const GridField v = smooth_occupation(measure_from_density(e), spec).field;
    L.col(static_cast<Eigen::Index>(q)) = Eigen::Map<const Eigen::VectorXd>(v.values.data(), v.size());
  }
  return L;
}

}  // namespace

Eigen::MatrixXd occupation_pair_density(const GridPtr& grid, const Point& x, double t, int rule_points) {
  require(rule_points == 8 || rule_points == 5, "occupation_pair_density: rule must have 5 or 8 points");
  require(grid->num_interior() <= kK2MaxNodes, "occupation_pair_density: grid exceeds the dense cost cap");
  PairQuadrature q = pair_density_rules(grid, x, t);
  return rule_points == 8 ? q.q8 : q.q5;
}

MomentValue exact_moment_k2(const MomentProblem& prob) {
  check_problem(prob);
  const GridPtr& grid = prob.f.grid;
  MomentValue out;
  if (grid->num_interior() > kK2MaxNodes)
    throw NumericalError("exact_moment_k2: " + std::to_string(grid->num_interior()) +
                         " interior nodes exceed the dense cost cap of " + std::to_string(kK2MaxNodes));
  if (grid->n() > kK2WarnN)
    out.warnings.push_back("exact_moment_k2: grid n=" + std::to_string(grid->n()) +
                           " is expensive (dense two-point kernel)");
  const Eigen::MatrixXd L = smoothing_matrix(grid, prob.spec);
  const std::size_t N = grid->num_nodes();
  Eigen::MatrixXd prod8 = Eigen::MatrixXd::Ones(N, N), prod5 = Eigen::MatrixXd::Ones(N, N);
  // Identical start points share one kernel.
  std::vector<std::pair<Point, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>> cache;
  for (const Point& x : prob.starts) {
    auto it = std::find_if(cache.begin(), cache.end(), [&](const auto& e) { return e.first == x; });
    if (it == cache.end()) {
      PairQuadrature q = pair_density_rules(grid, x, prob.t);
      Eigen::MatrixXd M8 = L * q.q8 * L.transpose();
      Eigen::MatrixXd M5 = L * q.q5 * L.transpose();
      cache.push_back({x, {std::move(M8), std::move(M5)}});
      it = std::prev(cache.end());
    }
    prod8 = prod8.cwiseProduct(it->second.first);
    prod5 = prod5.cwiseProduct(it->second.second);
  }
  Eigen::VectorXd fw(N);
  for (std::size_t z = 0; z < N; ++z) fw(z) = prob.f.values[z] * grid->node_weight(z);
  const double v8 = fw.dot(prod8 * fw), v5 = fw.dot(prod5 * fw);
  out.value = v8;
  out.error = std::abs(v8 - v5);
  return out;
}

}  // namespace islt
