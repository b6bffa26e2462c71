// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "islt/counting.hpp"
#include "islt/errors.hpp"
#include "islt/experiments.hpp"
#include "islt/spectral.hpp"
#include "islt/variational.hpp"

using namespace islt;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path config_path(const std::string& name) { return fs::path(ISLT_SOURCE_DIR) / "configs" / name; }

GridField sine_product(const GridPtr& g, int a, int b) {
  return sample_field(g, [&](const Point& x) { return std::sin(a * kPi * x[0]) * std::sin(b * kPi * x[1]); });
}

GridField power(const GridField& f, double e) {
  GridField out = f;
  for (double& v : out.values) v = std::pow(std::abs(v), e);
  return out;
}

// Ground-state shape times a seeded positive modulation.
GridField positive_field(const GridPtr& g, std::uint64_t seed) {
  const GridField r = random_smooth_field(g, seed, 3);
  const GridField s = sine_product(g, 1, 1);
  GridField out(g);
  const double m = std::max(1e-12, l2_norm(r));
  for (std::size_t q = 0; q < out.size(); ++q) out.values[q] = s[q] * std::exp(0.6 * r[q] / m);
  return out;
}

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

CompactSubset centered_box(double center, double half) {
  return {{center - half, center - half, 0}, {center + half, center + half, 0}};
}

// ----- criteria ------------------------------------------------------------------

Outcome spectral_golden() {
  const auto t0 = std::chrono::steady_clock::now();
  const SpectralBasis basis = dirichlet_eigs(make_grid(DomainSpec::unit_box(2), 128), 10);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<double> exact;
  for (int a = 1; a <= 6; ++a)
    for (int b = 1; b <= 6; ++b) exact.push_back(0.5 * kPi * kPi * (a * a + b * b));
  std::sort(exact.begin(), exact.end());
  double worst = 0.0;
  for (int q = 0; q < 10; ++q) worst = std::max(worst, std::abs(basis.eigenvalues[q] / exact[q] - 1.0));
  return {worst <= 0.005 && secs < 60.0, fmt("max rel error %.3e (tol 5e-3), %.2f s (limit 60 s)", worst, secs)};
}

Outcome weyl_growth() {
  const double s2 = weyl_slope(dirichlet_eigs(make_grid(DomainSpec::unit_box(2), 128), 200), 20, 200);
  const double s3 = weyl_slope(dirichlet_eigs(make_grid(DomainSpec::unit_box(3), 32), 200), 20, 200);
  // Same fit on the exact continuum spectrum, for reference.
  std::vector<double> cont;
  for (int a = 1; a <= 40; ++a)
    for (int b = 1; b <= 40; ++b) cont.push_back(0.5 * kPi * kPi * (a * a + b * b));
  std::sort(cont.begin(), cont.end());
  const double sc = weyl_slope(cont, 20, 200);
  std::vector<double> cont3;
  for (int a = 1; a <= 16; ++a)
    for (int b = 1; b <= 16; ++b)
      for (int c = 1; c <= 16; ++c) cont3.push_back(0.5 * kPi * kPi * (a * a + b * b + c * c));
  std::sort(cont3.begin(), cont3.end());
  const double sc3 = weyl_slope(cont3, 20, 200);
  const bool ok2 = std::abs(s2 - 1.0) <= 0.05, ok3 = std::abs(s3 - 2.0 / 3.0) <= 0.07;
  return {ok2 && ok3, fmt("d=2 slope %.4f (1 +- 0.05), d=3 slope %.4f (0.6667 +- 0.07); exact continuum spectra give "
                          "%.4f (d=2) and %.4f (d=3)",
                          s2, s3, sc, sc3)};
}

Outcome dv_minimization() {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 128);
  const RateResult r = minimize_dv(g);
  GridField psi1 = sine_product(g, 1, 1);
  const double nrm = l2_norm(psi1);
  for (double& v : psi1.values) v /= nrm;
  GridField diff = r.minimizer.fields.at(0);
  for (std::size_t q = 0; q < diff.size(); ++q) diff.values[q] -= psi1[q];
  const double rel = std::abs(r.value.value() / (kPi * kPi) - 1.0);
  const double dist = l2_norm(diff);
  double worst_fd = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GridField x = positive_field(g, 500 + s);
    const GridField v = random_smooth_field(g, 600 + s, 5);
    worst_fd = std::max(worst_fd, fd_mismatch(rayleigh_value, x, rayleigh_gradient(x), v));
  }
  return {rel <= 0.01 && dist <= 0.02 && worst_fd <= 1e-4,
          fmt("value %.6f rel %.2e (tol 1e-2), L2 distance %.2e (tol 0.02), worst FD %.2e (tol 1e-4)",
              r.value.value(), rel, dist, worst_fd)};
}

Outcome counting_exhaustive() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::uint64_t checks = 0;
  for (int p : {1, 2})
    for (int R : {1, 2}) {
      const AuditReport rep = counting_audit(6, p, R);
      ok = ok && rep.all_equal;
      checks += rep.total_checks;
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < 600.0, fmt("%llu (A, r, N) triples, all equal: %s, %.1f s (limit 600 s)",
                                  static_cast<unsigned long long>(checks), ok ? "yes" : "no", secs)};
}

Outcome moment_cross_validation() {
  struct Case {
    int p;
    double t, eps;
    int max_k;
  };
  const std::vector<Case> cases{{1, 0.3, 0.1, 2}, {1, 0.5, 0.2, 1}, {1, 0.5, 0.1, 1}, {2, 0.3, 0.1, 1}, {2, 0.3, 0.2, 2}};
  const ExperimentConfig base = load_config(config_path("moments.json").string());
  bool ok = true;
  std::string detail;
  int idx = 0;
  for (const Case& c : cases) {
    ExperimentConfig cfg = base;
    cfg.domain.motions = c.p;
    cfg.path.t = c.t;
    cfg.path.start.points.assign(c.p, cfg.path.start.points.front());
    cfg.mollifier.eps = c.eps;
    cfg.samples = 100000;
    cfg.seed = base.seed + idx++;
    const ExperimentReport rep = moment_comparison(cfg, c.max_k);
    for (const auto& row : rep.table.rows) {
      const bool within = row[6] == 1.0;
      ok = ok && within;
      detail += fmt("[p=%d t=%.1f eps=%.1f k=%d z=%+.2f%s] ", c.p, c.t, c.eps, static_cast<int>(row[0]), row[5],
                    within ? "" : " OUT");
    }
  }
  return {ok, detail + "(bound 3 SE + quadrature error, 1e5 paths)"};
}

Outcome eps_footprint() {
  const ExperimentReport rep = eps_contraction(load_config(config_path("eps_contraction.json").string()));
  std::string detail;
  for (const auto& r : rep.table.rows) detail += fmt("[f%d eps=%.2f median %.3e] ", static_cast<int>(r[1]), r[0], r[2]);
  return {rep.passed, detail + "(strictly decreasing per function)"};
}

Outcome gartner_ellis() {
  const auto reps = gartner_ellis_p1(load_config(config_path("gartner_ellis.json").string()));
  bool ok = reps.size() == 3;
  std::string detail;
  for (const auto& r : reps) {
    const double rel = r.get("rel_error");
    ok = ok && rel <= 0.02;
    detail += fmt("[fitted %.4f spectral %.4f rel %.2e] ", r.get("fitted_limit"), r.get("spectral_limit"), rel);
  }
  return {ok, detail + "(tol 2e-2)"};
}

Outcome theta_scaling() {
  const RateResult small = theta(make_grid(DomainSpec::box(2, 0.0, 1.0), 64), centered_box(0.5, 0.25), 2);
  const RateResult large = theta(make_grid(DomainSpec::box(2, 0.0, 2.0), 64), centered_box(1.0, 0.5), 2);
  const double ratio = large.value.value() / small.value.value();
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 64);
  bool mono = true;
  std::string values;
  double prev = INFINITY;
  for (double half : {0.125, 0.1875, 0.25, 0.3125}) {
    const double v = theta(g, centered_box(0.5, half), 2).value.value();
    mono = mono && v < prev;
    prev = v;
    values += fmt(" %.4f", v);
  }
  const bool ok = std::abs(ratio / 0.5 - 1.0) <= 0.02 && mono;
  return {ok, fmt("ratio %.5f (0.5 within 2%%), nested values%s %s", ratio, values.c_str(),
                  mono ? "strictly decreasing" : "NOT monotone")};
}

Outcome j_theta() {
  const GridPtr g = make_grid(DomainSpec::unit_box(2), 32);
  const CompactSubset U = centered_box(0.5, 0.25);
  const int p = 2;
  const RateResult thr = theta(g, U, p);
  const double th = thr.value.value();
  const double j_star = rate_J(power(thr.minimizer.fields[0], 2.0 * p), U, p).value.value();
  const double rel = std::abs(j_star / th - 1.0);
  const auto mask = subset_node_mask(U, *g);
  double worst = INFINITY;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GridField a = positive_field(g, 30 + s), b = positive_field(g, 40 + s);
    GridField dens(g);
    for (std::size_t q = 0; q < dens.size(); ++q) dens.values[q] = a[q] * a[q] * b[q] * b[q];
    double mU = 0.0;
    for (std::size_t q = 0; q < mask.size(); ++q)
      if (mask[q]) mU += g->node_weight(q) * dens[q];
    for (double& v : dens.values) v /= mU;
    worst = std::min(worst, rate_J(dens, U, p).value.value() - th);
  }
  return {rel <= 0.01 && worst >= -1e-6,
          fmt("J(mu*) %.5f vs theta %.5f rel %.2e (tol 1e-2); min J - theta over 5 random mu %.4f (>= -1e-6)", j_star,
              th, rel, worst)};
}

Outcome isl_scaling() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"scaling_2d.json", "scaling_3d.json"}) {
    const ExperimentConfig cfg = load_config(config_path(name).string());
    const ExperimentReport rep = run_experiment(cfg).front();
    const double tol = cfg.domain.dim == 2 ? 0.10 : 0.15;
    const double rel = rep.get("rel_error");
    ok = ok && rel <= tol;
    detail += fmt("[d=%d ratio %.4f expected %.4f rel %.3f tol %.2f, rerun z %+.2f] ", cfg.domain.dim,
                  rep.get("ratio"), rep.get("expected_ratio"), rel, tol, rep.get("z_rerun"));
  }
  return {ok, detail};
}

Outcome heuristic_conditions() {
  const ExperimentReport rep = run_experiment(load_config(config_path("heuristic_audit.json").string())).front();
  const double c1 = rep.get("cond1_residual"), c2 = rep.get("cond2_residual");
  return {c1 <= 1e-4 && c2 <= 1e-6, fmt("cond1 residual %.2e (tol 1e-4), cond2 residual %.2e (tol 1e-6)", c1, c2)};
}

std::map<std::string, std::string> run_outputs(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "timing.txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    m[fs::relative(e.path(), dir).string()] = s.str();
  }
  return m;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "islt_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "small.json";
  std::ofstream(cfg) << R"({
    "experiment": "moments",
    "domain": {"dim": 2, "lower": [0, 0], "upper": [1, 1], "motions": 2},
    "grid": {"n": 16},
    "path": {"dt": 0.001, "t": 0.2, "start": {"kind": "fixed", "points": [[0.5, 0.5]]}},
    "mollifier": {"eps": 0.2, "profile": "bump"},
    "test_functions": [{"kind": "sine", "amplitude": 1.0, "mode": [1, 1]}],
    "t_ladder": [0.1, 0.2],
    "eps_ladder": [0.15, 0.3],
    "delta_ladder": [0.05],
    "minimize": {"functional": "theta", "p": 2, "U": {"lower": [0.25, 0.25], "upper": [0.75, 0.75]}},
    "counting": {"k": 3, "p": 2, "R": 2},
    "samples": 500,
    "seed": 31
  })";
  const std::vector<std::vector<std::string>> commands{
      {"spectral"}, {"simulate"}, {"moments", "--max-k", "2"}, {"minimize"}, {"counting"}, {"gamma"},
      {"experiment"}};
  bool ok = true;
  std::string detail;
  for (const auto& cmd : commands) {
    const fs::path out = root / cmd.front();
    std::map<std::string, std::string> first;
    for (const char* w : {"1", "3"}) {
      std::vector<std::string> args = cmd;
      args.insert(args.end(), {"--config", cfg.string(), "--out", out.string(), "--workers", w, "--force"});
      std::ostringstream o, e;
      const int code = run_cli(args, o, e);
      if (code != 0) {
        ok = false;
        detail += "[" + cmd.front() + " exit " + std::to_string(code) + ": " + e.str() + "] ";
        break;
      }
      if (first.empty()) {
        first = run_outputs(out);
      } else {
        const bool same = run_outputs(out) == first;
        ok = ok && same;
        detail += "[" + cmd.front() + (same ? " identical" : " DIFFERS") + ", " + std::to_string(first.size()) +
                  " files] ";
      }
    }
  }
  fs::remove_all(root);
  return {ok, detail + "(workers 1 vs 3)"};
}

}  // namespace

// Arguments, when given, select criteria by number.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"spectral golden values", spectral_golden},
      {"Weyl growth", weyl_growth},
      {"DV minimization", dv_minimization},
      {"counting formula audit", counting_exhaustive},
      {"moment cross-validation", moment_cross_validation},
      {"eps-difference contraction", eps_footprint},
      {"Gartner-Ellis p=1", gartner_ellis},
      {"Theta scaling and monotonicity", theta_scaling},
      {"J-Theta consistency", j_theta},
      {"intersection mass scaling", isl_scaling},
      {"heuristic conditions", heuristic_conditions},
      {"determinism", determinism},
  };
  int failed = 0, idx = 0;
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!selected[idx++]) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", idx, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
