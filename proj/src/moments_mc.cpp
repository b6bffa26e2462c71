#include <cmath>

#include "islt/errors.hpp"
#include "islt/moments.hpp"

namespace islt {

double smoothed_intersection_value(const PathResult& path, const GridField& f, const MollifierSpec& spec) {
  if (!path.all_survived()) return 0.0;
  std::vector<GridField> v;
  for (const auto& m : path.motions) v.push_back(smooth_occupation(m.occupation, f.grid, spec).field);
  return test_integral(intersection_density(v), f);
}

McMoment mc_moment(int k, const std::vector<double>& values, std::size_t accepted) {
  require(k >= 1 && k <= 3, "mc_moment: k must be 1, 2 or 3");
  if (values.empty() || accepted == 0) throw EmptyEnsembleError("mc_moment: empty ensemble");
  const std::size_t n = values.size();
  std::vector<double> x(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = std::pow(values[j], k);
    sum += x[j];
  }
  McMoment out;
  out.sampled = n;
  out.accepted = accepted;
  out.estimate = sum / static_cast<double>(n);
  if (n > 1) {
    // Jackknife over leave-one-out means.
    const double nm1 = static_cast<double>(n - 1);
    double ss = 0.0;
    for (double xj : x) {
      const double loo = (sum - xj) / nm1;
      ss += (loo - out.estimate) * (loo - out.estimate);
    }
    out.std_error = std::sqrt(nm1 / static_cast<double>(n) * ss);
  }
  return out;
}

McMoment mc_moment(int k, const GridField& f, const MollifierSpec& spec, const Ensemble& ensemble) {
  if (ensemble.accepted.empty()) throw EmptyEnsembleError("mc_moment: empty ensemble");
  std::vector<double> values(ensemble.sampled, 0.0);
  for (std::size_t j = 0; j < ensemble.accepted.size(); ++j)
    values[j] = smoothed_intersection_value(ensemble.accepted[j], f, spec);
  return mc_moment(k, values, ensemble.accepted.size());
}

std::vector<double> mc_sample_values(const GridField& f, const MollifierSpec& spec, const DomainSpec& domain,
                                     const PathConfig& cfg, std::size_t n_samples, int workers,
                                     std::size_t* accepted) {
  check_resolvable(spec, *f.grid);
  // Single motion: ⟨smooth(ℓ), f⟩ = Σ_c ℓ_c a_c with the precomputed adjoint weights.
  std::vector<double> adj;
  if (domain.motions == 1) adj = smoothing_adjoint(f, spec);
  const RowFn row = [&](std::size_t, const PathResult& path, double* out) {
    out[1] = path.all_survived() ? 1.0 : 0.0;
    if (out[1] == 0.0) {
      out[0] = 0.0;
      return;
    }
    if (!adj.empty()) {
      const auto& occ = path.motions.front().occupation;
      double v = 0.0;
      for (std::size_t q = 0; q < occ.cells.size(); ++q) v += occ.masses[q] * adj[occ.cells[q]];
      out[0] = v;
    } else {
      out[0] = smoothed_intersection_value(path, f, spec);
    }
  };
  const std::vector<double> rows = run_ensemble(domain, *f.grid, cfg, n_samples, 2, row, workers);
  std::vector<double> values(n_samples);
  std::size_t acc = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    values[k] = rows[2 * k];
    acc += rows[2 * k + 1] != 0.0;
  }
  if (accepted) *accepted = acc;
  return values;
}

McMoment mc_moment(int k, const GridField& f, const MollifierSpec& spec, const DomainSpec& domain,
                   const PathConfig& cfg, std::size_t n_samples, int workers) {
  std::size_t acc = 0;
  const auto values = mc_sample_values(f, spec, domain, cfg, n_samples, workers, &acc);
  return mc_moment(k, values, acc);
}

}  // namespace islt
