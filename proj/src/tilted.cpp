#include <cmath>
#include <numbers>

#include "flow_util.hpp"
#include "islt/errors.hpp"
#include "islt/rng.hpp"
#include "islt/spectral.hpp"
#include "islt/variational.hpp"

namespace islt {

double tilted_objective(const GridField& f, const std::vector<GridField>& fi, const std::vector<GridField>& psi) {
  require(fi.size() == psi.size() && !psi.empty(), "tilted_objective: need one potential per field");
  std::vector<GridField> sq;
  for (const auto& s : psi) {
    GridField q(s.grid);
    for (std::size_t k = 0; k < q.size(); ++k) q.values[k] = s.values[k] * s.values[k];
    sq.push_back(std::move(q));
  }
  double v = l2_inner(intersection_density(sq), f);
  for (std::size_t i = 0; i < psi.size(); ++i) v += l2_inner(sq[i], fi[i]) - 0.5 * dirichlet_energy(psi[i]);
  return v;
}

TiltedResult tilted_sup(const GridField& f, const std::vector<GridField>& fi, int starts, std::uint64_t seed) {
  require(!fi.empty(), "tilted_sup: need at least one potential");
  require(starts >= 1, "tilted_sup: need at least one start");
  const GridPtr& grid = f.grid;
  for (const auto& g : fi) check_same_grid(*grid, *g.grid);
  for (double v : f.values) require(std::isfinite(v), "tilted_sup: potential must be bounded");
  const std::size_t p = fi.size();

  TiltedResult best;
  best.value = -INFINITY;
  for (int s = 0; s < starts; ++s) {
    // Positive random start: a bumped ground-state profile with seeded jitter.
    std::vector<GridField> psi;
    for (std::size_t i = 0; i < p; ++i) {
      GridField r = random_smooth_field(grid, seed * 104729ULL + 17ULL * s + i, 3);
      GridField base = sample_field(grid, [&](const Point& x) {
        const DomainSpec& dom = grid->domain();
        double v = 1.0;
        for (int a = 0; a < grid->dim(); ++a)
          v *= std::sin(std::numbers::pi * (x[a] - dom.lower[a]) / (dom.upper[a] - dom.lower[a]));
        return v;
      });
      for (std::size_t k = 0; k < r.size(); ++k) r.values[k] = std::abs(base.values[k] + 0.5 * r.values[k]);
      zero_boundary(r);
      detail::scale(r, 1.0 / l2_norm(r));
      psi.push_back(std::move(r));
    }
    double value = tilted_objective(f, fi, psi);
    int sweep = 0;
    for (; sweep < 500; ++sweep) {
      for (std::size_t i = 0; i < p; ++i) {
        GridField V = fi[i];
        for (std::size_t k = 0; k < V.size(); ++k) {
          double prod = f.values[k];
          for (std::size_t j = 0; j < p; ++j)
            if (j != i) prod *= psi[j].values[k] * psi[j].values[k];
          V.values[k] += prod;
        }
        psi[i] = schroedinger_ground_state(grid, V).field;
      }
      const double next = tilted_objective(f, fi, psi);
      const bool done = std::abs(next - value) <= 1e-12 * std::max(1.0, std::abs(next));
      value = next;
      if (done || p == 1) break;
    }
    if (value > best.value) {
      best.value = value;
      best.fields = psi;
      best.sweeps = sweep + 1;
      best.best_start = s;
    }
  }
  if (!std::isfinite(best.value)) throw NumericalError("tilted_sup: no finite value");
  return best;
}

}  // namespace islt
