#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "tilin/maxpool_relax.hpp"
#include "tilin/model.hpp"
#include "tilin/relaxation.hpp"

namespace tilin {

enum class Norm { L1, L2, Linf };

std::string to_string(Norm norm);
/// Accepts "1", "2", "inf" (also "linf", "l1", "l2").
Norm parse_norm(const std::string& text);

/// x -> A x + B over some reference layer's variables.
struct LinearMap {
  Matrix A;
  Vector B;
};

/// Symbolic upper and lower bounds carried together through backsubstitution.
struct BoundPair {
  LinearMap upper;
  LinearMap lower;
};

struct LayerBounds {
  Vector lower;
  Vector upper;
};

/// The set { x : ||x - center||_p <= radius }.
struct PerturbationBall {
  Vector center;
  double radius = 0.0;
  Norm norm = Norm::Linf;
};

/// ||row||_q with 1/p + 1/q = 1.
double dual_norm_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, Norm p);

/// Concretizes input-referenced maps over the ball (Hoelder).
LayerBounds global_interval(const LinearMap& upper, const LinearMap& lower,
                            const PerturbationBall& ball);

/// Exact composition through an affine layer: A <- A W, B <- A b + B.
BoundPair substitute_affine(const BoundPair& maps, const Affine& layer);

struct ActivationCache {
  std::vector<ScalarRelaxation> neurons;
};

struct PoolCache {
  std::vector<std::vector<std::size_t>> windows;
  std::vector<PoolRelaxation> relaxations;
  std::size_t input_dim = 0;
};

using CacheEntry = std::variant<std::monostate, ActivationCache, PoolCache>;

/// Relaxations chosen for each nonlinear layer together with the input
/// intervals they were built from. Index k refers to layer k (1-based, as in
/// NetworkBounds); entry 0 is unused.
struct RelaxationCache {
  std::vector<CacheEntry> entries;
  std::vector<LayerBounds> inputs;
};

/// Substitutes a nonlinear layer via its cached relaxations, splitting each
/// coefficient by sign. Throws std::invalid_argument on an empty entry.
BoundPair substitute_nonlinear(const BoundPair& maps, const CacheEntry& entry);

struct NetworkBounds {
  /// layers[0] is the input box, layers[k] the bounds on layer k's output.
  std::vector<LayerBounds> layers;
  RelaxationCache cache;

  const LayerBounds& output() const { return layers.back(); }
};

/// Layer-by-layer bounds with full backsubstitution to the input.
/// `net` must be normalized.
NetworkBounds compute_all_bounds(const Network& net, const PerturbationBall& ball,
                                 AnchorPolicy policy);

}  // namespace tilin
