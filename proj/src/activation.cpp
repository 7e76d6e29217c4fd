#include "tilin/activation.hpp"

#include <cmath>
#include <stdexcept>

namespace tilin {

namespace {

double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double activation_value(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::ReLU:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::Sigmoid:
      return sigmoid(x);
    case ActivationKind::Tanh:
      return std::tanh(x);
    case ActivationKind::Arctan:
      return std::atan(x);
  }
  throw std::invalid_argument("unknown activation kind");
}

double activation_slope(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::ReLU:
      return x >= 0.0 ? 1.0 : 0.0;
    case ActivationKind::Sigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Arctan:
      return 1.0 / (1.0 + x * x);
  }
  throw std::invalid_argument("unknown activation kind");
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::Sigmoid:
      return "sigmoid";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::Arctan:
      return "arctan";
  }
  return "unknown";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "sigmoid") return ActivationKind::Sigmoid;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "arctan" || name == "atan") return ActivationKind::Arctan;
  throw std::invalid_argument("unknown activation kind '" + std::string(name) + "'");
}

}  // namespace tilin
