#include "tilin/propagate.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace tilin {

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::L1:
      return "1";
    case Norm::L2:
      return "2";
    case Norm::Linf:
      return "inf";
  }
  return "?";
}

Norm parse_norm(const std::string& text) {
  if (text == "1" || text == "l1" || text == "L1") return Norm::L1;
  if (text == "2" || text == "l2" || text == "L2") return Norm::L2;
  if (text == "inf" || text == "linf" || text == "Linf" || text == "infinity") return Norm::Linf;
  throw std::invalid_argument("unsupported norm '" + text + "' (expected 1, 2 or inf)");
}

double dual_norm_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, Norm p) {
  switch (p) {
    case Norm::L1:
      return row.size() == 0 ? 0.0 : row.cwiseAbs().maxCoeff();
    case Norm::L2:
      return row.norm();
    case Norm::Linf:
      return row.cwiseAbs().sum();
  }
  throw std::invalid_argument("unsupported norm");
}

LayerBounds global_interval(const LinearMap& upper, const LinearMap& lower,
                            const PerturbationBall& ball) {
  const Eigen::Index n_ref = ball.center.size();
  if (upper.A.cols() != n_ref || lower.A.cols() != n_ref || upper.A.rows() != lower.A.rows() ||
      upper.B.size() != upper.A.rows() || lower.B.size() != lower.A.rows()) {
    throw DimensionError("linear maps do not reference the ball's input layer");
  }
  if (!(ball.radius >= 0.0)) throw std::invalid_argument("ball radius must be non-negative");

  const Eigen::Index n = upper.A.rows();
  LayerBounds out{Vector(upper.B.size()), Vector(upper.B.size())};
  const Vector up_center = upper.A * ball.center + upper.B;
  const Vector lo_center = lower.A * ball.center + lower.B;
  for (Eigen::Index i = 0; i < n; ++i) {
    double hi = up_center[i];
    double lo = lo_center[i];
    if (ball.radius > 0.0) {
      hi += ball.radius * dual_norm_row(upper.A.row(i), ball.norm);
      lo -= ball.radius * dual_norm_row(lower.A.row(i), ball.norm);
    }
    // Rounding can cross the two sides on exact (affine) rows.
    out.lower[i] = std::min(lo, hi);
    out.upper[i] = std::max(lo, hi);
  }
  return out;
}

BoundPair substitute_affine(const BoundPair& maps, const Affine& layer) {
  if (maps.upper.A.cols() != layer.weight.rows() || maps.lower.A.cols() != layer.weight.rows()) {
    throw DimensionError("affine layer output does not match the map's reference width");
  }
  BoundPair out;
  out.upper.A = maps.upper.A * layer.weight;
  out.upper.B = maps.upper.A * layer.bias + maps.upper.B;
  out.lower.A = maps.lower.A * layer.weight;
  out.lower.B = maps.lower.A * layer.bias + maps.lower.B;
  return out;
}

namespace {

/// One side of the sign split. `upper_side` selects whether positive
/// coefficients take the upper relaxation (true for the upper map).
LinearMap substitute_activation(const LinearMap& map, const ActivationCache& cache,
                                bool upper_side) {
  const auto n = static_cast<Eigen::Index>(cache.neurons.size());
  if (map.A.cols() != n) throw DimensionError("activation cache width does not match the map");
  Vector up_slope(n), up_icpt(n), lo_slope(n), lo_icpt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ScalarRelaxation& r = cache.neurons[static_cast<std::size_t>(i)];
    up_slope[i] = r.upper.slope;
    up_icpt[i] = r.upper.intercept;
    lo_slope[i] = r.lower.slope;
    lo_icpt[i] = r.lower.intercept;
  }
  const Vector& pos_slope = upper_side ? up_slope : lo_slope;
  const Vector& pos_icpt = upper_side ? up_icpt : lo_icpt;
  const Vector& neg_slope = upper_side ? lo_slope : up_slope;
  const Vector& neg_icpt = upper_side ? lo_icpt : up_icpt;

  const Matrix pos = map.A.cwiseMax(0.0);
  const Matrix neg = map.A.cwiseMin(0.0);
  LinearMap out;
  out.A = pos * pos_slope.asDiagonal();
  out.A += neg * neg_slope.asDiagonal();
  out.B = map.B + pos * pos_icpt + neg * neg_icpt;
  return out;
}

LinearMap substitute_pool(const LinearMap& map, const PoolCache& cache, bool upper_side) {
  const auto n_out = static_cast<Eigen::Index>(cache.windows.size());
  if (map.A.cols() != n_out || cache.relaxations.size() != cache.windows.size()) {
    throw DimensionError("pool cache width does not match the map");
  }
  LinearMap out;
  out.A = Matrix::Zero(map.A.rows(), static_cast<Eigen::Index>(cache.input_dim));
  out.B = map.B;
  for (Eigen::Index w = 0; w < n_out; ++w) {
    const auto& window = cache.windows[static_cast<std::size_t>(w)];
    const PoolRelaxation& relax = cache.relaxations[static_cast<std::size_t>(w)];
    const auto selected = static_cast<Eigen::Index>(window[relax.lower_index]);
    for (Eigen::Index r = 0; r < map.A.rows(); ++r) {
      const double c = map.A(r, w);
      if (c == 0.0) continue;
      // Positive coefficients take the plane on the upper map and the
      // selector on the lower map; negative ones the reverse.
      const bool use_plane = (c > 0.0) == upper_side;
      if (use_plane) {
        for (std::size_t t = 0; t < window.size(); ++t) {
          out.A(r, static_cast<Eigen::Index>(window[t])) +=
              c * relax.upper.coeffs[static_cast<Eigen::Index>(t)];
        }
        out.B[r] += c * relax.upper.intercept;
      } else {
        out.A(r, selected) += c;
      }
    }
  }
  return out;
}

}  // namespace

BoundPair substitute_nonlinear(const BoundPair& maps, const CacheEntry& entry) {
  if (const auto* act = std::get_if<ActivationCache>(&entry)) {
    return {substitute_activation(maps.upper, *act, true),
            substitute_activation(maps.lower, *act, false)};
  }
  if (const auto* pool = std::get_if<PoolCache>(&entry)) {
    return {substitute_pool(maps.upper, *pool, true), substitute_pool(maps.lower, *pool, false)};
  }
  throw std::invalid_argument("no cached relaxation for this layer");
}

namespace {

BoundPair backsubstitute(BoundPair maps, const Network& net, const RelaxationCache& cache,
                         std::size_t from_layer) {
  for (std::size_t j = from_layer; j >= 1; --j) {
    const Layer& layer = net.layers()[j - 1];
    if (const auto* affine = std::get_if<Affine>(&layer)) {
      maps = substitute_affine(maps, *affine);
    } else {
      maps = substitute_nonlinear(maps, cache.entries[j]);
    }
  }
  return maps;
}

ActivationCache build_activation_cache(const Activation& act, const LayerBounds& in,
                                       const Vector& anchor, AnchorPolicy policy) {
  ActivationCache cache;
  cache.neurons.reserve(static_cast<std::size_t>(in.lower.size()));
  for (Eigen::Index i = 0; i < in.lower.size(); ++i) {
    cache.neurons.push_back(relax(act.kind, in.lower[i], in.upper[i], anchor[i], policy));
  }
  return cache;
}

PoolCache build_pool_cache(const MaxPool& pool, const LayerBounds& in) {
  PoolCache cache;
  cache.windows = pool.windows;
  cache.input_dim = pool.input_dim;
  cache.relaxations.reserve(pool.windows.size());
  for (const auto& window : pool.windows) {
    Vector l(static_cast<Eigen::Index>(window.size()));
    Vector u(static_cast<Eigen::Index>(window.size()));
    for (std::size_t t = 0; t < window.size(); ++t) {
      l[static_cast<Eigen::Index>(t)] = in.lower[static_cast<Eigen::Index>(window[t])];
      u[static_cast<Eigen::Index>(t)] = in.upper[static_cast<Eigen::Index>(window[t])];
    }
    cache.relaxations.push_back(maxpool_bounds(l, u));
  }
  return cache;
}

}  // namespace

NetworkBounds compute_all_bounds(const Network& net, const PerturbationBall& ball,
                                 AnchorPolicy policy) {
  if (!net.is_normalized()) {
    throw std::invalid_argument("compute_all_bounds needs a normalized network");
  }
  if (static_cast<std::size_t>(ball.center.size()) != net.input_dim()) {
    throw DimensionError("ball center has length " + std::to_string(ball.center.size()) +
                         ", network expects " + std::to_string(net.input_dim()));
  }
  if (!(ball.radius >= 0.0)) throw std::invalid_argument("ball radius must be non-negative");

  const std::size_t K = net.num_layers();
  const std::vector<Vector> anchors = forward_trace(net, ball.center);

  NetworkBounds result;
  result.layers.reserve(K + 1);
  result.layers.push_back({(ball.center.array() - ball.radius).matrix(),
                           (ball.center.array() + ball.radius).matrix()});
  result.cache.entries.assign(K + 1, std::monostate{});
  result.cache.inputs.assign(K + 1, LayerBounds{});

  for (std::size_t k = 1; k <= K; ++k) {
    const Layer& layer = net.layers()[k - 1];
    const LayerBounds& in = result.layers[k - 1];
    if (const auto* act = std::get_if<Activation>(&layer)) {
      result.cache.entries[k] = build_activation_cache(*act, in, anchors[k - 1], policy);
      result.cache.inputs[k] = in;
      // Monotone activation: the interval image is exact.
      const auto f = [&](double v) { return activation_value(act->kind, v); };
      result.layers.push_back({in.lower.unaryExpr(f), in.upper.unaryExpr(f)});
    } else if (const auto* pool = std::get_if<MaxPool>(&layer)) {
      result.cache.entries[k] = build_pool_cache(*pool, in);
      result.cache.inputs[k] = in;
      const auto n = static_cast<Eigen::Index>(pool->windows.size());
      BoundPair maps{{Matrix::Identity(n, n), Vector::Zero(n)},
                     {Matrix::Identity(n, n), Vector::Zero(n)}};
      maps = backsubstitute(std::move(maps), net, result.cache, k);
      LayerBounds b = global_interval(maps.upper, maps.lower, ball);
      // Intersect with the interval image of the window maxima.
      for (Eigen::Index w = 0; w < n; ++w) {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t idx : pool->windows[static_cast<std::size_t>(w)]) {
          lo = std::max(lo, in.lower[static_cast<Eigen::Index>(idx)]);
          hi = std::max(hi, in.upper[static_cast<Eigen::Index>(idx)]);
        }
        b.lower[w] = std::max(b.lower[w], lo);
        b.upper[w] = std::min(b.upper[w], hi);
        if (b.lower[w] > b.upper[w]) b.lower[w] = b.upper[w] = 0.5 * (b.lower[w] + b.upper[w]);
      }
      result.layers.push_back(std::move(b));
    } else if (const auto* affine = std::get_if<Affine>(&layer)) {
      BoundPair maps{{affine->weight, affine->bias}, {affine->weight, affine->bias}};
      maps = backsubstitute(std::move(maps), net, result.cache, k - 1);
      result.layers.push_back(global_interval(maps.upper, maps.lower, ball));
    }
  }
  return result;
}

}  // namespace tilin
