#include <cmath>
#include <limits>

#include "islt/errors.hpp"
#include "islt/rng.hpp"
#include "islt/variational.hpp"

namespace islt {

RateValue RateValue::finite(double v) {
  require(std::isfinite(v), "RateValue::finite needs a finite number");
  RateValue r;
  r.v_ = v;
  return r;
}

RateValue RateValue::infinity(std::string reason) {
  RateValue r;
  r.infinite_ = true;
  r.reason_ = std::move(reason);
  return r;
}

double RateValue::value() const { return infinite_ ? std::numeric_limits<double>::infinity() : v_; }

RateValue operator+(const RateValue& a, const RateValue& b) {
  if (!a.is_finite()) return a;
  if (!b.is_finite()) return b;
  return RateValue::finite(a.v_ + b.v_);
}

RateValue operator*(double s, const RateValue& a) {
  require(s >= 0.0, "RateValue scaling needs a nonnegative factor");
  if (!a.is_finite()) return a;
  return RateValue::finite(s * a.v_);
}

bool operator<(const RateValue& a, const RateValue& b) {
  if (!a.is_finite()) return false;
  if (!b.is_finite()) return true;
  return a.v_ < b.v_;
}

bool operator==(const RateValue& a, const RateValue& b) {
  if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
  return a.v_ == b.v_;
}

GridField random_smooth_field(const GridPtr& grid, std::uint64_t seed, int modes) {
  const Grid& g = *grid;
  const DomainSpec& dom = g.domain();
  const int d = g.dim();
  std::vector<double> coef;
  std::vector<std::array<int, 3>> ks;
  std::uint32_t ctr = 0;
  for (int a = 1; a <= modes; ++a)
    for (int b = 1; b <= modes; ++b)
      for (int c = 1; c <= (d == 3 ? modes : 1); ++c) {
        const auto r = Philox4x32::generate({ctr++, 0x5EEDu, 0u, 0u}, Philox4x32::key_from_seed(seed));
        const double z = box_muller(r[0], r[1])[0];
        coef.push_back(z / (a * a + b * b + (d == 3 ? c * c : 0)));
        ks.push_back({a, b, c});
      }
  GridField f(grid);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const Point x = g.node_point(i);
    double v = 0.0;
    for (std::size_t q = 0; q < ks.size(); ++q) {
      double s = coef[q];
      for (int a = 0; a < d; ++a)
        s *= std::sin(ks[q][a] * M_PI * (x[a] - dom.lower[a]) / (dom.upper[a] - dom.lower[a]));
      v += s;
    }
    f.values[i] = v;
  }
  zero_boundary(f);
  const double n = l2_norm(f);
  if (n > 0) for (double& v : f.values) v /= n;
  return f;
}

}  // namespace islt
