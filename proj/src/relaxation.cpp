#include "tilin/relaxation.hpp"

#include <algorithm>
#include <cmath>

namespace tilin {

namespace {

constexpr int kMaxBisection = 200;

ScalarLine tangent_at(ActivationKind kind, double x) {
  return ScalarLine::through(x, activation_value(kind, x), activation_slope(kind, x));
}

ScalarLine chord(ActivationKind kind, double l, double u) {
  const double fl = activation_value(kind, l);
  const double fu = activation_value(kind, u);
  return ScalarLine::through(l, fl, (fu - fl) / (u - l));
}

void require_s_shaped(ActivationKind kind, double l, double u) {
  if (!is_s_shaped(kind)) throw NoTangentPoint("tangent points exist only for S-shaped activations");
  if (!(l < 0.0 && 0.0 < u)) throw NoTangentPoint("tangent points require l < 0 < u");
}

ScalarRelaxation degenerate(ActivationKind kind, double l, double u, double m) {
  // f is non-decreasing, so the endpoint values bound it on a tiny interval.
  ScalarRelaxation r;
  r.l = l;
  r.u = u;
  r.anchor = m;
  r.lower = ScalarLine::constant(activation_value(kind, l));
  r.upper = ScalarLine::constant(activation_value(kind, u));
  r.lower_rule = r.upper_rule = LineRule::Constant;
  r.lower_touch = r.upper_touch = m;
  return r;
}

}  // namespace

std::string to_string(LineRule rule) {
  switch (rule) {
    case LineRule::Constant:
      return "constant";
    case LineRule::Zero:
      return "zero";
    case LineRule::Identity:
      return "identity";
    case LineRule::Chord:
      return "chord";
    case LineRule::TangentAtAnchor:
      return "tangent_at_anchor";
    case LineRule::TangentThroughLower:
      return "tangent_through_lower";
    case LineRule::TangentThroughUpper:
      return "tangent_through_upper";
  }
  return "unknown";
}

std::string to_string(AnchorPolicy policy) {
  return policy == AnchorPolicy::ForwardValue ? "forward" : "midpoint";
}

AnchorPolicy parse_policy(const std::string& name) {
  if (name == "forward" || name == "forward_value") return AnchorPolicy::ForwardValue;
  if (name == "midpoint") return AnchorPolicy::Midpoint;
  throw std::invalid_argument("unknown anchor policy '" + name + "' (expected forward|midpoint)");
}

double tangent_lower_anchor(ActivationKind kind, double l, double u) {
  require_s_shaped(kind, l, u);
  const double fl = activation_value(kind, l);
  const double k = (activation_value(kind, u) - fl) / (u - l);
  if (!(k > activation_slope(kind, u))) {
    throw NoTangentPoint("chord slope does not exceed f'(u); no tangent through (l, f(l))");
  }
  // residual is strictly decreasing on (0, u]: positive at 0, negative at u.
  auto residual = [&](double t) {
    return activation_slope(kind, t) * (t - l) - (activation_value(kind, t) - fl);
  };
  double lo = 0.0;
  double hi = u;
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double tangent_upper_anchor(ActivationKind kind, double l, double u) {
  require_s_shaped(kind, l, u);
  const double fu = activation_value(kind, u);
  const double k = (fu - activation_value(kind, l)) / (u - l);
  if (!(k >= activation_slope(kind, l))) {
    throw NoTangentPoint("chord slope is below f'(l); no tangent through (u, f(u))");
  }
  // residual is strictly decreasing on [l, 0): non-negative at l, negative at 0.
  auto residual = [&](double t) {
    return activation_slope(kind, t) * (t - u) - (activation_value(kind, t) - fu);
  };
  double lo = l;
  double hi = 0.0;
  for (int i = 0; i < kMaxBisection; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

ScalarRelaxation sshape_bounds(ActivationKind kind, double l, double u, double m) {
  if (!is_s_shaped(kind)) throw std::invalid_argument("sshape_bounds needs sigmoid, tanh or arctan");
  if (!(l <= u)) throw std::invalid_argument("sshape_bounds needs l <= u");
  m = std::clamp(m, l, u);
  if (u - l < kDegenerateWidth) return degenerate(kind, l, u, m);

  const double fl = activation_value(kind, l);
  const double fu = activation_value(kind, u);
  const double fm = activation_value(kind, m);
  const double dl = activation_slope(kind, l);
  const double du = activation_slope(kind, u);
  const double dm = activation_slope(kind, m);
  const double k = (fu - fl) / (u - l);

  ScalarRelaxation r;
  r.l = l;
  r.u = u;
  r.anchor = m;
  r.lower_touch = r.upper_touch = m;

  auto set_upper = [&](LineRule rule, double touch) {
    r.upper_rule = rule;
    r.upper_touch = touch;
    r.upper = rule == LineRule::Chord ? chord(kind, l, u) : tangent_at(kind, touch);
  };
  auto set_lower = [&](LineRule rule, double touch) {
    r.lower_rule = rule;
    r.lower_touch = touch;
    r.lower = rule == LineRule::Chord ? chord(kind, l, u) : tangent_at(kind, touch);
  };

  if (m >= 0.0) {
    // Upper line. With l >= 0 the whole interval is concave and the tangent
    // at m is the k_ml > f'(m) branch (its limit when m == l).
    if (l >= 0.0) {
      set_upper(LineRule::TangentAtAnchor, m);
    } else {
      const double k_ml = (fm - fl) / (m - l);
      if (k_ml > dm) {
        set_upper(LineRule::TangentAtAnchor, m);
      } else if (k > du && u > 0.0) {
        set_upper(LineRule::TangentThroughLower, tangent_lower_anchor(kind, l, u));
      } else {
        set_upper(LineRule::Chord, m);
      }
    }
    // Lower line.
    if (k < dl || l >= 0.0) {
      set_lower(LineRule::Chord, m);
    } else if (u <= 0.0) {
      // u == m == 0: the tangent point x** collapses onto u.
      set_lower(LineRule::TangentThroughUpper, u);
    } else {
      set_lower(LineRule::TangentThroughUpper, tangent_upper_anchor(kind, l, u));
    }
  } else {
    // Lower line. With u <= 0 the whole interval is convex and the tangent at
    // m is the k_mu >= f'(m) branch (its limit when m == u).
    if (u <= 0.0) {
      set_lower(LineRule::TangentAtAnchor, m);
    } else {
      const double k_mu = (fm - fu) / (m - u);
      if (k_mu >= dm) {
        set_lower(LineRule::TangentAtAnchor, m);
      } else if (k > dl) {
        set_lower(LineRule::TangentThroughUpper, tangent_upper_anchor(kind, l, u));
      } else {
        set_lower(LineRule::Chord, m);
      }
    }
    // Upper line.
    if (k <= du || u <= 0.0) {
      set_upper(LineRule::Chord, m);
    } else {
      set_upper(LineRule::TangentThroughLower, tangent_lower_anchor(kind, l, u));
    }
  }
  return r;
}

ScalarRelaxation relu_bounds(double l, double u, double m) {
  if (!(l <= u)) throw std::invalid_argument("relu_bounds needs l <= u");
  m = std::clamp(m, l, u);
  if (u - l < kDegenerateWidth) return degenerate(ActivationKind::ReLU, l, u, m);

  ScalarRelaxation r;
  r.l = l;
  r.u = u;
  r.anchor = m;
  r.lower_touch = r.upper_touch = m;
  if (u <= 0.0) {
    r.lower = r.upper = ScalarLine{0.0, 0.0};
    r.lower_rule = r.upper_rule = LineRule::Zero;
  } else if (l >= 0.0) {
    r.lower = r.upper = ScalarLine{1.0, 0.0};
    r.lower_rule = r.upper_rule = LineRule::Identity;
  } else {
    const double slope = u / (u - l);
    r.upper = ScalarLine{slope, -slope * l};
    r.upper_rule = LineRule::Chord;
    if (m > 0.0) {
      r.lower = ScalarLine{1.0, 0.0};
      r.lower_rule = LineRule::Identity;
    } else {
      r.lower = ScalarLine{0.0, 0.0};
      r.lower_rule = LineRule::Zero;
    }
  }
  return r;
}

ScalarRelaxation relax(ActivationKind kind, double l, double u, double preactivation,
                       AnchorPolicy policy) {
  const double m = policy == AnchorPolicy::Midpoint ? 0.5 * (l + u) : std::clamp(preactivation, l, u);
  return kind == ActivationKind::ReLU ? relu_bounds(l, u, m) : sshape_bounds(kind, l, u, m);
}

}  // namespace tilin
