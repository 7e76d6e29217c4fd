#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tilin/model.hpp"

namespace tilin {

/// One entry of the sorted endpoint sequence.
struct Endpoint {
  double value;
  std::size_t neuron;
  bool is_upper;

  bool operator==(const Endpoint&) const = default;
};

/// Endpoints {l_i, u_i} from largest to smallest. Ties: upper endpoints
/// first, then lower neuron index.
std::vector<Endpoint> endpoint_ordering(const Vector& l, const Vector& u);

enum class PoolCase {
  Dominant,  // u_i >= l_i >= ...      : max is x_i on the whole box
  Pair,      // u_i, u_j, then l_j     : max depends on x_i and x_j only
  Triple,    // u_i >= u_j >= u_k >= ...
  Fallback,  // constant plane max_i u_i
};

struct PoolUpper {
  Vector coeffs;  // upper(x) = coeffs . x + intercept
  double intercept = 0.0;
  PoolCase pool_case = PoolCase::Fallback;
  /// Neurons carrying the slopes. `primary` is the top upper endpoint in the
  /// Triple case and the non-anchor neuron in the Pair case; `secondary`
  /// carries b = l_secondary (Pair) or the second slope (Triple).
  std::size_t primary = 0;
  std::size_t secondary = 0;

  double operator()(const Vector& x) const { return coeffs.dot(x) + intercept; }
};

struct PoolRelaxation {
  PoolUpper upper;
  std::size_t lower_index = 0;  // lower(x) = x[lower_index]
};

inline constexpr std::size_t kMaxVertexCheck = 20;

class PoolSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Upper bounding plane of max(x) over the box [l, u].
PoolUpper maxpool_upper(const Vector& l, const Vector& u);

/// Argmax of the interval midpoints, lowest index on ties.
std::size_t maxpool_lower(const Vector& l, const Vector& u);

PoolRelaxation maxpool_bounds(const Vector& l, const Vector& u);

/// Exact soundness of an upper plane for max(x) over the box: max(x) minus
/// an affine function is convex, so checking the 2^n vertices suffices.
/// Throws PoolSizeError for n > 20.
bool verify_plane_sound(const Vector& coeffs, double intercept, const Vector& l, const Vector& u,
                        double tolerance = 1e-9);

}  // namespace tilin
