#include "islt/simulate.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

#include "islt/errors.hpp"
#include "islt/io.hpp"

namespace islt {

std::vector<std::string> validate_path_config(const DomainSpec& domain, const Grid& grid,
                                              const PathConfig& cfg) {
  domain.validate();
  check_same_grid(grid, Grid(domain, grid.n()));
  require(cfg.dt > 0.0 && std::isfinite(cfg.dt), "time step must be positive");
  require(cfg.t > 0.0 && std::isfinite(cfg.t), "horizon t must be positive");
  require(cfg.b.empty() || static_cast<int>(cfg.b.size()) == domain.motions,
          "horizon vector b must have one entry per motion");
  for (double bi : cfg.b) require(bi > 0.0 && std::isfinite(bi), "all horizons must be positive");
  switch (cfg.start.kind) {
    case StartKind::fixed_point:
      require(cfg.start.points.size() <= 1, "fixed start takes a single point");
      break;
    case StartKind::product_of_points:
      require(static_cast<int>(cfg.start.points.size()) == domain.motions,
              "product start needs one point per motion");
      break;
    case StartKind::uniform:
      break;
  }
  for (const Point& x : cfg.start.points) require(domain.contains(x), "start point outside the domain");
  std::vector<std::string> warnings;
  const double hmin = grid.min_h();
  if (cfg.dt > 0.25 * hmin * hmin) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "time step %.3g exceeds the recommended h^2/4 = %.3g", cfg.dt,
                  0.25 * hmin * hmin);
    warnings.emplace_back(buf);
  }
  return warnings;
}

double SparseOccupation::total() const {
  double s = 0.0;
  for (double m : masses) s += m;
  return s;
}

GridMeasure SparseOccupation::to_dense(const GridPtr& grid) const {
  GridMeasure mu(grid);
  for (std::size_t q = 0; q < cells.size(); ++q) mu.masses[cells[q]] = masses[q];
  return mu;
}

bool PathResult::all_survived() const {
  for (const auto& m : motions)
    if (!m.survived) return false;
  return true;
}

Point draw_start(const DomainSpec& domain, const StartDistribution& start, std::uint64_t seed, int motion) {
  switch (start.kind) {
    case StartKind::fixed_point:
      return start.points.empty() ? domain.center() : start.points.front();
    case StartKind::product_of_points:
      return start.points.at(motion);
    case StartKind::uniform: {
      // Reserved counter range (step_hi = all ones) keeps start draws disjoint from steps.
      const auto r = Philox4x32::generate({0xFFFFFFFFu, 0xFFFFFFFFu, static_cast<std::uint32_t>(motion), 0u},
                                          Philox4x32::key_from_seed(seed));
      Point x{0.0, 0.0, 0.0};
      for (int a = 0; a < domain.dim; ++a)
        x[a] = domain.lower[a] + to_unit(r[a]) * (domain.upper[a] - domain.lower[a]);
      return x;
    }
  }
  return domain.center();
}

namespace {

struct Workspace {
  std::vector<double> dense;
  std::vector<std::uint32_t> touched;
};

void sample_into(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg, std::uint64_t seed,
                 Workspace& ws, PathResult& out) {
  if (ws.dense.size() != grid.num_cells()) ws.dense.assign(grid.num_cells(), 0.0);
  out.seed = seed;
  out.motions.resize(domain.motions);
  for (int i = 0; i < domain.motions; ++i) {
    MotionResult& mr = out.motions[i];
    mr.horizon = cfg.horizon(i);
    ws.touched.clear();
    const Point x0 = draw_start(domain, cfg.start, seed, i);
    const MotionTrace tr = simulate_motion(domain, cfg.dt, mr.horizon, x0, seed, static_cast<std::uint32_t>(i),
                                           [&](const Point& x, double dur) {
                                             const auto c = static_cast<std::uint32_t>(grid.cell_of(x));
                                             if (ws.dense[c] == 0.0) ws.touched.push_back(c);
                                             ws.dense[c] += dur;
                                           });
    mr.exit_time = tr.exit_time;
    mr.survived = tr.survived;
    mr.endpoint = tr.endpoint;
    std::sort(ws.touched.begin(), ws.touched.end());
    mr.occupation.cells.assign(ws.touched.begin(), ws.touched.end());
    mr.occupation.masses.resize(ws.touched.size());
    for (std::size_t q = 0; q < ws.touched.size(); ++q) {
      mr.occupation.masses[q] = ws.dense[ws.touched[q]];
      ws.dense[ws.touched[q]] = 0.0;
    }
  }
}

}  // namespace

PathResult sample_paths(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg) {
  validate_path_config(domain, grid, cfg);
  Workspace ws;
  PathResult out;
  sample_into(domain, grid, cfg, cfg.seed, ws, out);
  return out;
}

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

Ensemble survival_ensemble(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg,
                           std::size_t n_samples, int workers) {
  validate_path_config(domain, grid, cfg);
  require(n_samples >= 1, "survival_ensemble needs at least one sample");
  std::vector<PathResult> all(n_samples);
  const long long n = static_cast<long long>(n_samples);
#pragma omp parallel num_threads(resolve_workers(workers))
  {
    Workspace ws;
#pragma omp for schedule(dynamic, 16)
    for (long long k = 0; k < n; ++k) {
      PathResult pr;
      sample_into(domain, grid, cfg, cfg.seed + static_cast<std::uint64_t>(k), ws, pr);
      if (pr.all_survived()) all[k] = std::move(pr);
    }
  }
  Ensemble ens;
  ens.sampled = n_samples;
  for (auto& pr : all)
    if (!pr.motions.empty()) ens.accepted.push_back(std::move(pr));
  if (ens.accepted.empty())
    throw EmptyEnsembleError("survival ensemble is empty: no sample survived all horizons");
  return ens;
}

std::vector<double> run_ensemble(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg,
                                 std::size_t n_samples, std::size_t ncols, const RowFn& row, int workers) {
  validate_path_config(domain, grid, cfg);
  std::vector<double> rows(n_samples * ncols, 0.0);
  const long long n = static_cast<long long>(n_samples);
#pragma omp parallel num_threads(resolve_workers(workers))
  {
    Workspace ws;
    PathResult pr;
#pragma omp for schedule(dynamic, 16)
    for (long long k = 0; k < n; ++k) {
      sample_into(domain, grid, cfg, cfg.seed + static_cast<std::uint64_t>(k), ws, pr);
      row(static_cast<std::size_t>(k), pr, rows.data() + static_cast<std::size_t>(k) * ncols);
    }
  }
  return rows;
}

std::vector<double> run_ensemble_serial(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg,
                                        std::size_t n_samples, std::size_t ncols, const RowFn& row) {
  validate_path_config(domain, grid, cfg);
  std::vector<double> rows(n_samples * ncols, 0.0);
  Workspace ws;
  PathResult pr;
  for (std::size_t k = 0; k < n_samples; ++k) {
    sample_into(domain, grid, cfg, cfg.seed + k, ws, pr);
    row(k, pr, rows.data() + k * ncols);
  }
  return rows;
}

void write_ensemble_csv(const std::string& path, const PathConfig& cfg, int motions,
                        const std::vector<double>& rows, std::size_t ncols,
                        const std::vector<std::string>& extra_names) {
  require(ncols == 3 * static_cast<std::size_t>(motions) + extra_names.size(),
          "ensemble CSV: column count mismatch");
  CsvWriter csv(path);
  std::vector<std::string> header{"seed"};
  for (int i = 1; i <= motions; ++i) header.push_back("tau_" + std::to_string(i));
  for (int i = 1; i <= motions; ++i) header.push_back("survived_" + std::to_string(i));
  for (int i = 1; i <= motions; ++i) header.push_back("mass_" + std::to_string(i));
  header.insert(header.end(), extra_names.begin(), extra_names.end());
  csv.header(header);
  const std::size_t n = ncols ? rows.size() / ncols : 0;
  for (std::size_t k = 0; k < n; ++k) {
    csv.begin_row();
    csv.field(static_cast<unsigned long long>(cfg.seed + k));
    for (std::size_t c = 0; c < ncols; ++c) csv.field(rows[k * ncols + c]);
    csv.end_row();
  }
}

}  // namespace islt
