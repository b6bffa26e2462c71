#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "islt/geometry.hpp"
#include "islt/rng.hpp"

namespace islt {

enum class StartKind { fixed_point, uniform, product_of_points };

struct StartDistribution {
  StartKind kind = StartKind::fixed_point;
  // fixed_point: one point (empty means the domain center); product_of_points: one per motion.
  std::vector<Point> points;
};

struct PathConfig {
  double dt = 1e-4;
  double t = 1.0;
  std::vector<double> b;   // per-motion horizon factors; empty means all ones
  StartDistribution start;
  std::uint64_t seed = 0;

  double horizon(int motion) const { return b.empty() ? t : t * b[motion]; }
};

// Throws on invalid configs; returns warnings (time step above the h²/4 threshold).
std::vector<std::string> validate_path_config(const DomainSpec& domain, const Grid& grid,
                                              const PathConfig& cfg);

struct SparseOccupation {
  std::vector<std::uint32_t> cells;   // ascending
  std::vector<double> masses;

  double total() const;
  GridMeasure to_dense(const GridPtr& grid) const;
};

struct MotionResult {
  SparseOccupation occupation;
  double horizon = 0.0;
  double exit_time = std::numeric_limits<double>::infinity();
  bool survived = true;
  Point endpoint{0.0, 0.0, 0.0};
};

struct PathResult {
  std::uint64_t seed = 0;
  std::vector<MotionResult> motions;

  bool all_survived() const;
};

struct MotionTrace {
  double exit_time = std::numeric_limits<double>::infinity();
  bool survived = true;
  Point endpoint{0.0, 0.0, 0.0};
};

Point draw_start(const DomainSpec& domain, const StartDistribution& start, std::uint64_t seed, int motion);

// Walks one motion up to its horizon or exit. on_step(x, duration) is called with the
// pre-step position and the time credited to it; the exit step credits the partial time.
template <class OnStep>
MotionTrace simulate_motion(const DomainSpec& dom, double dt, double horizon, const Point& start,
                            std::uint64_t seed, std::uint32_t motion, OnStep&& on_step) {
  const int d = dom.dim;
  const Philox4x32::Key key = Philox4x32::key_from_seed(seed);
  MotionTrace out;
  Point x = start;
  const double sqrt_dt = std::sqrt(dt), inv_dt = 1.0 / dt;
  for (std::uint64_t s = 0;; ++s) {
    const double t0 = static_cast<double>(s) * dt;
    const double h = std::min(dt, horizon - t0);
    if (h <= 1e-12 * dt) break;
    const bool full = h == dt;
    const std::uint32_t lo = static_cast<std::uint32_t>(s), hi = static_cast<std::uint32_t>(s >> 32);
    const auto r0 = Philox4x32::generate({lo, hi, motion, 0u}, key);
    const auto z01 = box_muller(r0[0], r0[1]);
    double z[3] = {z01[0], z01[1], 0.0};
    if (d == 3) z[2] = box_muller(Philox4x32::generate({lo, hi, motion, 1u}, key)[0], r0[3])[0];
    const double sh = full ? sqrt_dt : std::sqrt(h);
    Point y = x;
    for (int a = 0; a < d; ++a) y[a] = x[a] + sh * z[a];

    double theta = 2.0;
    for (int a = 0; a < d; ++a) {
      double bound;
      if (y[a] <= dom.lower[a]) bound = dom.lower[a];
      else if (y[a] >= dom.upper[a]) bound = dom.upper[a];
      else continue;
      theta = std::min(theta, (bound - x[a]) / (y[a] - x[a]));
    }
    if (theta > 1.0) {
      // Unobserved crossing of a face between two interior positions.
      double keep = 1.0;
      const double inv_h = full ? inv_dt : 1.0 / h;
      for (int a = 0; a < d; ++a) {
        const double e1 = -2.0 * (x[a] - dom.lower[a]) * (y[a] - dom.lower[a]) * inv_h;
        const double e2 = -2.0 * (dom.upper[a] - x[a]) * (dom.upper[a] - y[a]) * inv_h;
        if (e1 > -40.0) keep *= 1.0 - std::exp(e1);
        if (e2 > -40.0) keep *= 1.0 - std::exp(e2);
      }
      if (keep < 1.0 && to_unit(r0[2]) < 1.0 - keep) theta = 0.5;
    }
    if (theta <= 1.0) {
      on_step(x, theta * h);
      out.survived = false;
      out.exit_time = t0 + theta * h;
      for (int a = 0; a < d; ++a) out.endpoint[a] = x[a] + theta * (y[a] - x[a]);
      return out;
    }
    on_step(x, h);
    x = y;
  }
  out.endpoint = x;
  return out;
}

PathResult sample_paths(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg);

struct Ensemble {
  std::vector<PathResult> accepted;
  std::size_t sampled = 0;

  std::size_t accepted_count() const { return accepted.size(); }
  double acceptance() const { return sampled ? double(accepted.size()) / double(sampled) : 0.0; }
};

// Sample k uses seed cfg.seed + k. Throws EmptyEnsembleError when nothing survives.
Ensemble survival_ensemble(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg,
                           std::size_t n_samples, int workers = 0);

// Per-sample statistics: row(k, path, out) fills ncols values for sample k. Rows are
// stored by sample index, so results do not depend on the worker count.
using RowFn = std::function<void(std::size_t, const PathResult&, double*)>;
std::vector<double> run_ensemble(const DomainSpec& domain, const Grid& grid, const PathConfig& cfg,
                                 std::size_t n_samples, std::size_t ncols, const RowFn& row,
                                 int workers = 0);
// Serial reference of run_ensemble.
std::vector<double> run_ensemble_serial(const DomainSpec& domain, const Grid& grid,
                                        const PathConfig& cfg, std::size_t n_samples,
                                        std::size_t ncols, const RowFn& row);

int resolve_workers(int workers);

// Summary CSV: seed, tau_i, survived_i, mass_i, then the extra columns.
void write_ensemble_csv(const std::string& path, const PathConfig& cfg, int motions,
                        const std::vector<double>& rows, std::size_t ncols,
                        const std::vector<std::string>& extra_names);

}  // namespace islt
