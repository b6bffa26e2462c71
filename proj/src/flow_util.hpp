#pragma once

#include <cmath>
#include <vector>

#include "islt/geometry.hpp"
#include "islt/sine_transform.hpp"

namespace islt::detail {

inline void axpy(double a, const GridField& x, GridField& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y.values[i] += a * x.values[i];
}

inline GridField lincomb(double a, const GridField& x, double b, const GridField& y) {
  GridField out(x.grid);
  for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = a * x.values[i] + b * y.values[i];
  return out;
}

inline void scale(GridField& x, double a) {
  for (double& v : x.values) v *= a;
}

inline double dot(const std::vector<GridField>& a, const std::vector<GridField>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += l2_inner(a[i], b[i]);
  return s;
}

// (K + shift)^{-1} on interior nodes, K = -Δ_h.
class SobolevPreconditioner {
public:
  SobolevPreconditioner(const GridPtr& grid, double shift) : dst_(grid), shift_(shift) {}
  GridField apply(const GridField& f) const {
    const double s = shift_;
    return dst_.apply(f, [s](double lam) { return 1.0 / (2.0 * lam + s); });
  }

private:
  SineTransform dst_;
  double shift_;
};

}  // namespace islt::detail
