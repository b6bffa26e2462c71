#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "islt/geometry.hpp"

namespace islt {

// Complete eigenbasis of the FD Dirichlet Laplacian on a box via the type-I sine transform.
// Coefficient vectors live on the (n-1)^d interior nodes, x fastest.
class SineTransform {
public:
  explicit SineTransform(GridPtr grid);
  ~SineTransform();
  SineTransform(const SineTransform&) = delete;
  SineTransform& operator=(const SineTransform&) = delete;

  const GridPtr& grid() const { return grid_; }
  std::size_t size() const { return size_; }
  // Eigenvalue of -1/2 Δ_h for each coefficient slot.
  const std::vector<double>& eigenvalues() const { return lambda_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

  std::vector<double> analyze(const GridField& f) const;
  GridField synthesize(const std::vector<double>& coeffs) const;
  // g(H) f for a scalar function g of the eigenvalue.
  GridField apply(const GridField& f, const std::function<double(double)>& g) const;
  GridField synthesize_scaled(const std::vector<double>& coeffs,
                              const std::function<double(double)>& g) const;

private:
  void transform(const double* in, double* out) const;

  GridPtr grid_;
  std::size_t size_ = 0;
  std::vector<std::size_t> interior_nodes_;
  std::vector<double> lambda_;
  double lambda_min_ = 0.0, lambda_max_ = 0.0;
  double inverse_scale_ = 1.0;
  void* plan_ = nullptr;
};

// Exact discrete killed heat semigroup e^{-sH}, H = -1/2 Δ_h.
class DirichletSemigroup {
public:
  explicit DirichletSemigroup(GridPtr grid);

  const GridPtr& grid() const { return dst_->grid(); }
  const SineTransform& transform() const { return *dst_; }

  GridField heat(double s, const GridField& f) const;
  // S_s = e^{-sH} 1: probability of surviving up to time s.
  GridField survival(double s) const;
  // Interpolated point source at x: density of a unit mass.
  GridField point_source(const Point& x) const;
  // p_s(x, .) as a field over the second argument.
  GridField kernel_from(double s, const Point& x) const;

private:
  std::shared_ptr<SineTransform> dst_;
};

}  // namespace islt
