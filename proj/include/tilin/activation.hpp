#pragma once

#include <string>
#include <string_view>

namespace tilin {

enum class ActivationKind { ReLU, Sigmoid, Tanh, Arctan };

/// Value of the activation at x.
double activation_value(ActivationKind kind, double x);

/// First derivative at x. For ReLU the right derivative is used at 0.
double activation_slope(ActivationKind kind, double x);

/// True for the S-shaped kinds (convex below 0, concave above, odd around
/// the inflection point).
inline bool is_s_shaped(ActivationKind kind) { return kind != ActivationKind::ReLU; }

std::string to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

}  // namespace tilin
