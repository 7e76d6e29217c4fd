#include "tilin/maxpool_relax.hpp"

#include <algorithm>
#include <cstdint>

namespace tilin {

namespace {

void check_box(const Vector& l, const Vector& u) {
  if (l.size() != u.size() || l.size() == 0) {
    throw DimensionError("pool box needs matching, non-empty lower and upper vectors");
  }
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (!(l[i] <= u[i])) throw std::invalid_argument("pool box needs l <= u");
  }
}

/// (u_top - anchor) / (u_top - l_top), or 0 on a zero-width coordinate whose
/// term vanishes on the box anyway.
double slope_to(double lo, double hi, double anchor) {
  const double width = hi - lo;
  return width > 0.0 ? (hi - anchor) / width : 0.0;
}

}  // namespace

std::vector<Endpoint> endpoint_ordering(const Vector& l, const Vector& u) {
  check_box(l, u);
  std::vector<Endpoint> q;
  q.reserve(static_cast<std::size_t>(2 * l.size()));
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    q.push_back({u[i], static_cast<std::size_t>(i), true});
    q.push_back({l[i], static_cast<std::size_t>(i), false});
  }
  std::stable_sort(q.begin(), q.end(), [](const Endpoint& a, const Endpoint& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.is_upper != b.is_upper) return a.is_upper;
    return a.neuron < b.neuron;
  });
  return q;
}

PoolUpper maxpool_upper(const Vector& l, const Vector& u) {
  const auto q = endpoint_ordering(l, u);
  const auto n = l.size();
  const auto at = [](const Vector& v, std::size_t i) { return v[static_cast<Eigen::Index>(i)]; };

  // Plane in the form sum_i a_i (x_i - l_i) + b.
  Vector a = Vector::Zero(n);
  double b = 0.0;
  PoolUpper p;

  const std::size_t top = q[0].neuron;
  if (!q[1].is_upper) {
    // q[1] is l_top: x_top dominates every other coordinate.
    p.pool_case = PoolCase::Dominant;
    p.primary = p.secondary = top;
    a[static_cast<Eigen::Index>(top)] = 1.0;
    b = at(l, top);
  } else if (!q[2].is_upper) {
    // Third endpoint is the lower end of one of the top two neurons; that
    // neuron anchors the plane with slope 1.
    const std::size_t second = q[1].neuron;
    const std::size_t j = q[2].neuron;
    const std::size_t i = j == top ? second : top;
    p.pool_case = PoolCase::Pair;
    p.primary = i;
    p.secondary = j;
    a[static_cast<Eigen::Index>(i)] = slope_to(at(l, i), at(u, i), at(l, j));
    a[static_cast<Eigen::Index>(j)] = 1.0;
    b = at(l, j);
  } else {
    const std::size_t i = top;
    const std::size_t j = q[1].neuron;
    const double uk = q[2].value;
    p.pool_case = PoolCase::Triple;
    p.primary = i;
    p.secondary = j;
    a[static_cast<Eigen::Index>(i)] = slope_to(at(l, i), at(u, i), uk);
    a[static_cast<Eigen::Index>(j)] = slope_to(at(l, j), at(u, j), uk);
    b = uk;
  }

  // Fixed coordinates contribute no slope.
  for (Eigen::Index idx = 0; idx < n; ++idx) {
    if (!(u[idx] > l[idx])) a[idx] = 0.0;
  }
  p.coeffs = a;
  p.intercept = b - a.dot(l);

  if (static_cast<std::size_t>(n) <= kMaxVertexCheck &&
      !verify_plane_sound(p.coeffs, p.intercept, l, u)) {
    p.pool_case = PoolCase::Fallback;
    p.coeffs = Vector::Zero(n);
    p.intercept = u.maxCoeff();
    p.primary = p.secondary = top;
  }
  return p;
}

std::size_t maxpool_lower(const Vector& l, const Vector& u) {
  check_box(l, u);
  std::size_t best = 0;
  double best_mid = 0.5 * (l[0] + u[0]);
  for (Eigen::Index i = 1; i < l.size(); ++i) {
    const double mid = 0.5 * (l[i] + u[i]);
    if (mid > best_mid) {
      best_mid = mid;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

PoolRelaxation maxpool_bounds(const Vector& l, const Vector& u) {
  return {maxpool_upper(l, u), maxpool_lower(l, u)};
}

bool verify_plane_sound(const Vector& coeffs, double intercept, const Vector& l, const Vector& u,
                        double tolerance) {
  check_box(l, u);
  const auto n = static_cast<std::size_t>(l.size());
  if (n > kMaxVertexCheck) {
    throw PoolSizeError("vertex check supports at most 20 inputs, got " + std::to_string(n));
  }
  if (static_cast<std::size_t>(coeffs.size()) != n) {
    throw DimensionError("plane has " + std::to_string(coeffs.size()) + " coefficients for " +
                         std::to_string(n) + " inputs");
  }
  const std::uint64_t vertices = std::uint64_t{1} << n;
  Vector v(l.size());
  for (std::uint64_t mask = 0; mask < vertices; ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      v[idx] = (mask >> i) & 1U ? u[idx] : l[idx];
    }
    if (coeffs.dot(v) + intercept < v.maxCoeff() - tolerance) return false;
  }
  return true;
}

}  // namespace tilin
