#pragma once

#include <stdexcept>
#include <string>

#include "tilin/activation.hpp"

namespace tilin {

/// x -> slope * x + intercept
struct ScalarLine {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }

  static ScalarLine constant(double value) { return {0.0, value}; }
  static ScalarLine through(double x0, double y0, double slope) { return {slope, y0 - slope * x0}; }
};

/// Which construction produced a bounding line. Tests use it to know where
/// the line must touch the activation curve.
enum class LineRule {
  Constant,             // l == u (or numerically so)
  Zero,                 // ReLU inactive
  Identity,             // ReLU active
  Chord,                // through (l, f(l)) and (u, f(u))
  TangentAtAnchor,      // tangent at m
  TangentThroughLower,  // tangent at x*, passing through (l, f(l))
  TangentThroughUpper,  // tangent at x**, passing through (u, f(u))
};

std::string to_string(LineRule rule);

struct ScalarRelaxation {
  ScalarLine lower;
  ScalarLine upper;
  double l = 0.0;
  double u = 0.0;
  double anchor = 0.0;
  LineRule lower_rule = LineRule::Constant;
  LineRule upper_rule = LineRule::Constant;
  /// Tangent point of the lower / upper line when its rule is one of the
  /// Tangent* rules; otherwise equal to the anchor.
  double lower_touch = 0.0;
  double upper_touch = 0.0;
};

enum class AnchorPolicy {
  ForwardValue,  // m = pre-activation at the unperturbed input
  Midpoint,      // m = (l + u) / 2
};

std::string to_string(AnchorPolicy policy);
AnchorPolicy parse_policy(const std::string& name);

/// Raised when a tangent point is requested outside its existence conditions.
class NoTangentPoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Widths below this are treated as a single point.
inline constexpr double kDegenerateWidth = 1e-9;

/// x* in (0, u]: the point whose tangent passes through (l, f(l)).
/// Requires an S-shaped kind, l < 0 < u, and chord slope > f'(u).
/// Bisection keeps the endpoint on the side where the tangent stays above f,
/// so the returned tangent is a sound upper line.
double tangent_lower_anchor(ActivationKind kind, double l, double u);

/// x** in [l, 0): the point whose tangent passes through (u, f(u)).
/// Requires an S-shaped kind, l < 0 < u, and chord slope >= f'(l).
double tangent_upper_anchor(ActivationKind kind, double l, double u);

/// Bounding lines for Sigmoid/Tanh/Arctan over [l, u] anchored at m.
ScalarRelaxation sshape_bounds(ActivationKind kind, double l, double u, double m);

ScalarRelaxation relu_bounds(double l, double u, double m);

/// Picks the anchor per policy and dispatches on the activation kind.
ScalarRelaxation relax(ActivationKind kind, double l, double u, double preactivation,
                       AnchorPolicy policy);

}  // namespace tilin
