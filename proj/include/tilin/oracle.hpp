#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilin/propagate.hpp"

namespace tilin {

struct OracleConfig {
  std::size_t samples = 10000;
  std::size_t grid = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SamplingMode {
  Uniform,         // direction x radius * U^(1/n)
  BoundaryBiased,  // half of the points pushed onto the sphere / box faces
};

/// Points inside the ball, deterministic for a given seed.
std::vector<Vector> sample_ball(const PerturbationBall& ball, std::size_t n, std::uint64_t seed,
                                SamplingMode mode = SamplingMode::BoundaryBiased);

/// ||x||_p
double lp_norm(const Vector& x, Norm p);

struct LayerViolation {
  std::size_t layer = 0;
  std::size_t neuron = 0;
  std::size_t sample = 0;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double excess = 0.0;
};

struct OracleReport {
  std::string oracle;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_violation = 0.0;
  std::vector<LayerViolation> details;  // first few violations only

  bool ok() const { return violations == 0; }
};

nlohmann::json to_json(const OracleReport& report);

/// Evaluates the network on sampled ball points and counts every neuron value
/// that leaves its interval by more than `tolerance`. `bounds[k]` must hold
/// the bounds of layer k's output (entry 0 the input box).
OracleReport soundness_check(const Network& net, const std::vector<LayerBounds>& bounds,
                             const PerturbationBall& ball, std::size_t n, std::uint64_t seed,
                             double tolerance = 1e-7);

struct AttackBudget {
  /// Forward evaluations allowed per probed radius.
  std::size_t evaluations_per_radius = 2000;
  /// Radii tried on the coarse doubling pass before giving up.
  double max_radius = 1e3;
  /// Bisection steps of the fine pass.
  int refine_steps = 30;
};

inline constexpr double kNoAttackFound = std::numeric_limits<double>::infinity();

/// Smallest radius at which a misclassified point was exhibited, measured as
/// the actual ||x_adv - x0||_p. Upper-bounds the exact robust radius.
/// Returns kNoAttackFound when no adversarial point turns up.
double empirical_attack_radius(const Network& net, const Vector& x0, std::size_t label, Norm p,
                               const AttackBudget& budget = {}, std::uint64_t seed = 0);

/// Integral of upper - lower over [l, u], closed form.
double relaxation_area(const ScalarRelaxation& r);

/// Tensor-grid trapezoid quadrature of coeffs . x + intercept over the box.
/// Exact for affine integrands up to rounding; meant for low dimensions.
double integrate_affine_over_box(const Vector& coeffs, double intercept, const Vector& l,
                                 const Vector& u, std::size_t points_per_dim = 17);

}  // namespace tilin
