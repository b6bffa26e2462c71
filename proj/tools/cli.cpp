#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "islt/config.hpp"
#include "islt/counting.hpp"
#include "islt/errors.hpp"
#include "islt/experiments.hpp"
#include "islt/io.hpp"
#include "islt/moments.hpp"
#include "islt/spectral.hpp"
#include "islt/variational.hpp"

namespace islt {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Common {
  std::string config_path;
  std::string out = "runs";
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool force = false;
  std::optional<int> n;
  std::string domain;
  std::optional<std::size_t> samples;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON run configuration");
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--workers", c.workers, "worker threads (default: available parallelism)");
  sub->add_option("--out", c.out, "base directory for run outputs")->capture_default_str();
  sub->add_flag("--force", c.force, "reuse an existing output directory");
  sub->add_option("--cache-dir", c.cache_dir, "spectral basis cache directory")->envname("ISLT_CACHE_DIR");
  sub->add_option("--n", c.n, "grid cells per axis");
  sub->add_option("--domain", c.domain, "unit-square or unit-cube");
  sub->add_option("--samples", c.samples, "Monte Carlo sample budget");
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << s;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (!c.domain.empty()) {
    int d;
    if (c.domain == "unit-square") d = 2;
    else if (c.domain == "unit-cube") d = 3;
    else throw ValidationError("unknown domain '" + c.domain + "' (expected unit-square or unit-cube)");
    cfg.domain = DomainSpec::unit_box(d, cfg.domain.motions);
    for (auto& f : cfg.test_functions) f.center = cfg.domain.center();
  }
  if (c.n) cfg.n = *c.n;
  if (c.seed) cfg.seed = *c.seed;
  if (c.samples) cfg.samples = *c.samples;
  return cfg;
}

struct Run {
  fs::path dir;
  std::string hash8;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

// Creates runs/<sub>-<hash8>-<seed> and writes the manifest. extra carries subcommand
// arguments that are not part of the config.
Run open_run(const Common& c, const std::string& sub, const ExperimentConfig& cfg, const std::string& extra = "") {
  cfg.validate();
  const std::string canonical = serialize_config(cfg);
  Run run;
  run.hash8 = hex64(fnv1a64(canonical + extra)).substr(0, 8);
  run.dir = fs::path(c.out) / (sub + "-" + run.hash8 + "-" + std::to_string(cfg.seed));
  if (fs::exists(run.dir) && !c.force)
    throw ValidationError("output directory " + run.dir.string() + " exists (pass --force to overwrite)");
  fs::create_directories(run.dir);
  json m;
  m["subcommand"] = sub;
  m["arguments"] = extra;
  m["config_path"] = c.config_path;
  m["config_hash"] = config_hash(cfg);
  m["input_hash"] = c.config_path.empty() ? std::string("") : file_hash(c.config_path);
  m["seed"] = cfg.seed;
  m["output_dir"] = run.dir.generic_string();
  m["version"] = kVersion;
  m["config"] = json::parse(canonical);
  write_json(run.dir / "manifest.json", m);
  return run;
}

void close_run(const Run& run, std::ostream& out) {
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "wall_seconds %.3f\n", secs);
  write_text(run.dir / "timing.txt", buf);
  out << "output: " << run.dir.generic_string() << "\n";
}

json rate_json(const std::string& functional, const RateResult& r) {
  json j;
  j["functional"] = functional;
  j["value"] = num(r.value.value());
  j["finite"] = r.value.is_finite();
  if (!r.value.is_finite()) j["reason"] = r.value.reason();
  j["iterations"] = r.iterations;
  j["grad_norm"] = num(r.grad_norm);
  j["converged"] = r.converged;
  j["restart_index"] = r.restart_index;
  j["max_pairwise_distance"] = num(r.max_pairwise_distance);
  j["weights"] = r.minimizer.weights;
  return j;
}

// Nonnegative density from a catalog entry, boundary zeroed, unit mass on `mask` (all nodes if empty).
GridField target_density(const TestFunctionSpec& spec, const GridPtr& grid, const std::vector<unsigned char>& mask) {
  GridField g = make_test_function(spec, grid);
  for (double v : g.values) require(v >= 0.0, "target density must be nonnegative: use a nonnegative test function");
  zero_boundary(g);
  const auto& w = grid->node_weights();
  double m = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q)
    if (mask.empty() || mask[q]) m += w[q] * g.values[q];
  require(m > 0.0, "target density has zero mass");
  for (double& v : g.values) v /= m;
  return g;
}

// ----- subcommands ------------------------------------------------------------

int cmd_spectral(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(c);
  const Run run = open_run(c, "spectral", cfg);
  const GridPtr grid = make_grid(cfg.domain, cfg.n);
  const int count = cfg.modes ? cfg.modes : default_mode_count(*grid);
  bool hit = false;
  const SpectralBasis basis =
      c.cache_dir.empty() ? dirichlet_eigs(grid, count) : cached_dirichlet_eigs(c.cache_dir, grid, count, &hit);
  const int d = cfg.domain.dim;
  CsvWriter csv((run.dir / "eigenvalues.csv").string());
  std::vector<std::string> head{"index", "m1", "m2"};
  if (d == 3) head.push_back("m3");
  head.insert(head.end(), {"eigenvalue", "continuum"});
  csv.header(head);
  for (int q = 0; q < basis.count(); ++q) {
    double cont = 0.0;
    csv.begin_row();
    csv.field(q + 1);
    for (int a = 0; a < d; ++a) {
      const int m = basis.modes[q][a];
      csv.field(m);
      const double side = cfg.domain.upper[a] - cfg.domain.lower[a];
      cont += 0.5 * std::numbers::pi * std::numbers::pi * m * m / (side * side);
    }
    csv.field(basis.eigenvalues[q]);
    csv.field(cont);
    csv.end_row();
  }
  json s;
  s["count"] = basis.count();
  s["lambda_1"] = basis.eigenvalues.front();
  s["sup_norm"] = basis.sup_norm;
  if (basis.count() >= 200) s["weyl_slope_20_200"] = weyl_slope(basis, 20, 200);
  write_json(run.dir / "summary.json", s);
  if (!c.cache_dir.empty()) out << (hit ? "basis loaded from cache\n" : "basis computed and cached\n");
  out << "lambda_1 = " << format_number(basis.eigenvalues.front()) << "\n";
  close_run(run, out);
  return 0;
}

int cmd_simulate(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(c);
  const Run run = open_run(c, "simulate", cfg);
  const GridPtr grid = make_grid(cfg.domain, cfg.n);
  PathConfig pc = cfg.path;
  pc.seed = cfg.seed;
  const auto warnings = validate_path_config(cfg.domain, *grid, pc);
  const GridField f = make_test_function(cfg.test_functions.front(), grid);
  check_resolvable(cfg.mollifier, *grid);
  const int p = cfg.domain.motions;
  const std::size_t ncols = 3 * static_cast<std::size_t>(p) + 1;
  const RowFn row = [&](std::size_t, const PathResult& path, double* r) {
    for (int i = 0; i < p; ++i) {
      const MotionResult& m = path.motions[i];
      r[i] = m.exit_time;
      r[p + i] = m.survived ? 1.0 : 0.0;
      r[2 * p + i] = m.occupation.total();
    }
    r[3 * p] = smoothed_intersection_value(path, f, cfg.mollifier);
  };
  const auto rows = run_ensemble(cfg.domain, *grid, pc, cfg.samples, ncols, row, c.workers);
  write_ensemble_csv((run.dir / "ensemble.csv").string(), pc, p, rows, ncols, {"smoothed_value"});
  std::vector<double> x(cfg.samples);
  std::size_t accepted = 0;
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    x[k] = rows[k * ncols + 3 * p];
    bool all = true;
    for (int i = 0; i < p; ++i) all = all && rows[k * ncols + p + i] == 1.0;
    accepted += all;
  }
  json s;
  s["sampled"] = cfg.samples;
  s["accepted"] = accepted;
  s["acceptance"] = static_cast<double>(accepted) / static_cast<double>(cfg.samples);
  if (accepted > 0) {
    const McMoment m = mc_moment(1, x, accepted);
    s["mean_smoothed_value"] = num(m.estimate);
    s["std_error"] = num(m.std_error);
  }
  s["warnings"] = warnings;
  write_json(run.dir / "summary.json", s);
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  out << "accepted " << accepted << " of " << cfg.samples << "\n";
  close_run(run, out);
  return 0;
}

void write_report(const fs::path& dir, const std::vector<ExperimentReport>& reports, const std::string& config_id) {
  json all = json::array();
  for (const auto& rep : reports) {
    CsvWriter csv((dir / (rep.name + ".csv")).string());
    std::vector<std::string> head{"config"};
    head.insert(head.end(), rep.table.columns.begin(), rep.table.columns.end());
    csv.header(head);
    for (const auto& r : rep.table.rows) {
      csv.begin_row();
      csv.field(config_id);
      for (double v : r) csv.field(v);
      csv.end_row();
    }
    json j;
    j["name"] = rep.name;
    j["passed"] = rep.passed;
    json s = json::object();
    for (const auto& [k, v] : rep.summary) s[k] = num(v);
    j["summary"] = s;
    j["notes"] = rep.notes;
    all.push_back(j);
  }
  write_json(dir / "report.json", all);
}

int cmd_moments(const Common& c, int max_k, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(c);
  cfg.experiment = "moments";
  const Run run = open_run(c, "moments", cfg, "max_k=" + std::to_string(max_k));
  const ExperimentReport rep = moment_comparison(cfg, max_k, c.workers);
  write_report(run.dir, {rep}, run.hash8);
  for (const auto& r : rep.table.rows)
    out << "k=" << r[0] << " exact " << format_number(r[1]) << " mc " << format_number(r[3]) << " se "
        << format_number(r[4]) << " z " << format_number(r[5]) << "\n";
  close_run(run, out);
  return 0;
}

int cmd_minimize(const Common& c, const std::string& functional, std::optional<int> p, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(c);
  if (!functional.empty()) cfg.minimize.functional = functional;
  if (p) cfg.minimize.p = *p;
  const std::string fn = cfg.minimize.functional;
  const Run run = open_run(c, "minimize", cfg);
  const GridPtr grid = make_grid(cfg.domain, cfg.n);
  FlowOptions flow = cfg.minimize.flow;
  flow.seed = cfg.seed;
  const int mp = cfg.minimize.p;
  std::vector<double> b = cfg.minimize.b.empty() ? std::vector<double>(mp, 1.0) : cfg.minimize.b;
  RateResult r;
  if (fn == "dv") {
    r = minimize_dv(grid, flow);
  } else if (fn == "theta") {
    r = theta(grid, cfg.minimize.U, mp, flow);
  } else if (fn == "chi") {
    r = chi_B(grid, mp, flow);
  } else if (fn == "I") {
    r = rate_I(target_density(cfg.test_functions.front(), grid, {}), b, mp, flow);
  } else if (fn == "J") {
    const auto mask = subset_node_mask(cfg.minimize.U, *grid);
    GridField g = target_density(cfg.test_functions.front(), grid, mask);
    for (std::size_t q = 0; q < g.size(); ++q)
      if (!mask[q]) g.values[q] = 0.0;
    r = rate_J(g, cfg.minimize.U, mp, flow);
  } else {
    throw ValidationError("unknown functional '" + fn + "' (expected dv, I, J, theta or chi)");
  }
  const json j = rate_json(fn, r);
  write_json(run.dir / "result.json", j);
  for (std::size_t i = 0; i < r.minimizer.fields.size(); ++i)
    write_field_csv((run.dir / ("minimizer_" + std::to_string(i + 1) + ".csv")).string(), r.minimizer.fields[i]);
  out << j.dump() << "\n";
  close_run(run, out);
  return 0;
}

int cmd_counting(const Common& c, std::optional<int> k, std::optional<int> p, std::optional<int> R,
                 std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = resolve_config(c);
  if (k) cfg.counting.k = *k;
  if (p) cfg.counting.p = *p;
  if (R) cfg.counting.R = *R;
  const Run run = open_run(c, "counting", cfg);
  const AuditReport rep = counting_audit(cfg.counting.k, cfg.counting.p, cfg.counting.R, c.workers);
  write_audit_csv((run.dir / "audit.csv").string(), rep);
  json s;
  s["k"] = cfg.counting.k;
  s["p"] = cfg.counting.p;
  s["R"] = cfg.counting.R;
  s["rows"] = rep.rows.size();
  s["total_checks"] = rep.total_checks;
  s["all_equal"] = rep.all_equal;
  write_json(run.dir / "summary.json", s);
  out << "audit rows " << rep.rows.size() << ", checks " << rep.total_checks
      << (rep.all_equal ? ", all equal\n" : ", MISMATCH\n");
  close_run(run, out);
  if (!rep.all_equal) {
    err << "error: counting formula disagrees with enumeration\n";
    return 2;
  }
  return 0;
}

int cmd_gamma(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(c);
  const Run run = open_run(c, "gamma", cfg);
  const GridPtr grid = make_grid(cfg.domain, cfg.n);
  const int p = cfg.domain.motions;
  std::vector<GridField> gi;
  for (int i = 0; i < p; ++i)
    gi.push_back(target_density(cfg.test_functions[i % cfg.test_functions.size()], grid, {}));
  const GridField g = intersection_density(gi);
  const std::vector<double> b = cfg.path.b.empty() ? std::vector<double>(p, 1.0) : cfg.path.b;
  const RateValue exact = rate_I_full(g, gi, b, 1e-9);
  const auto rows = gamma_probe(g, gi, b, cfg.eps_ladder, cfg.delta_ladder, cfg.seed, cfg.mollifier.profile);
  CsvWriter csv((run.dir / "gamma.csv").string());
  csv.header({"eps", "delta", "inf_value", "finite", "members_in_ball"});
  for (const auto& r : rows) {
    csv.begin_row();
    csv.field(r.eps);
    csv.field(r.delta);
    csv.field(r.inf_value.value());
    csv.field(r.inf_value.is_finite());
    csv.field(r.members_in_ball);
    csv.end_row();
  }
  json s;
  s["rate_I_full"] = num(exact.value());
  s["rows"] = rows.size();
  write_json(run.dir / "summary.json", s);
  out << "I(target tuple) = " << format_number(exact.value()) << "\n";
  close_run(run, out);
  return 0;
}

int cmd_experiment(const Common& c, const std::string& name, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(c);
  if (!name.empty()) cfg.experiment = name;
  const Run run = open_run(c, "experiment", cfg);
  const auto reports = run_experiment(cfg, c.workers);
  write_report(run.dir, reports, run.hash8);
  for (const auto& rep : reports) {
    out << rep.name << ": " << (rep.passed ? "PASS" : "FAIL") << "\n";
    for (const auto& note : rep.notes) out << "  note: " << note << "\n";
  }
  close_run(run, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Intersection local time lab: spectral oracles, Monte Carlo ensembles and rate-functional solvers", "islt-lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;

  auto* spectral = app.add_subcommand("spectral", "compute (and cache) the Dirichlet eigenbasis");
  auto* simulate = app.add_subcommand("simulate", "sample killed Brownian ensembles");
  auto* moments = app.add_subcommand("moments", "exact vs Monte Carlo smoothed moments");
  auto* minimize = app.add_subcommand("minimize", "minimize dv | I | J | theta | chi");
  auto* counting = app.add_subcommand("counting", "exhaustive audit of the permutation-counting formula");
  auto* gamma = app.add_subcommand("gamma", "upper-bound probe of the smoothed rate functional");
  auto* experiment = app.add_subcommand("experiment", "run a named experiment");
  for (auto* s : {spectral, simulate, moments, minimize, counting, gamma, experiment}) add_common(s, common);

  int max_k = 1;
  moments->add_option("--max-k", max_k, "highest moment order (1 or 2)")->check(CLI::Range(1, 2));
  std::string functional;
  std::optional<int> min_p;
  minimize->add_option("functional", functional, "dv, I, J, theta or chi");
  minimize->add_option("--p", min_p, "number of motions");
  std::optional<int> ck, cp, cR;
  counting->add_option("--k", ck, "moment order k");
  counting->add_option("--p", cp, "number of motions");
  counting->add_option("--R", cR, "index cutoff");
  std::string exp_name;
  experiment->add_option("name", exp_name,
                         "gartner_ellis, ldp_tuple, heuristic_audit, scaling, eps_contraction or moments");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (*spectral) return cmd_spectral(common, out);
    if (*simulate) return cmd_simulate(common, out);
    if (*moments) return cmd_moments(common, max_k, out);
    if (*minimize) return cmd_minimize(common, functional, min_p, out);
    if (*counting) return cmd_counting(common, ck, cp, cR, out, err);
    if (*gamma) return cmd_gamma(common, out);
    if (*experiment) return cmd_experiment(common, exp_name, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 1;
}

}  // namespace islt
