#include "tilin/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>

namespace tilin {

void OracleConfig::validate() const {
  if (samples == 0 || grid == 0) throw std::invalid_argument("oracle counts must be positive");
}

double lp_norm(const Vector& x, Norm p) {
  switch (p) {
    case Norm::L1:
      return x.cwiseAbs().sum();
    case Norm::L2:
      return x.norm();
    case Norm::Linf:
      return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
  }
  throw std::invalid_argument("unsupported norm");
}

namespace {

/// Perturbation with ||d||_p <= radius.
Vector sample_offset(std::mt19937_64& rng, Eigen::Index n, double radius, Norm p,
                     SamplingMode mode) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool on_boundary = mode == SamplingMode::BoundaryBiased && unit(rng) < 0.5;
  Vector d(n);
  switch (p) {
    case Norm::Linf: {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = 2.0 * unit(rng) - 1.0;
        d[i] = on_boundary && unit(rng) < 0.5 ? std::copysign(radius, t) : radius * t;
      }
      return d;
    }
    case Norm::L2: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) d[i] = gauss(rng);
      const double len = d.norm();
      if (len == 0.0) return Vector::Zero(n);
      const double r = on_boundary ? radius : radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
      d *= r / len;
      break;
    }
    case Norm::L1: {
      std::exponential_distribution<double> expo(1.0);
      for (Eigen::Index i = 0; i < n; ++i) d[i] = unit(rng) < 0.5 ? -expo(rng) : expo(rng);
      const double len = d.cwiseAbs().sum();
      if (len == 0.0) return Vector::Zero(n);
      const double r = on_boundary ? radius : radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
      d *= r / len;
      break;
    }
  }
  // Rounding can leave the point a hair outside the ball.
  const double len = lp_norm(d, p);
  if (len > radius && len > 0.0) d *= radius / len;
  return d;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

std::vector<Vector> sample_ball(const PerturbationBall& ball, std::size_t n, std::uint64_t seed,
                                SamplingMode mode) {
  if (!(ball.radius >= 0.0)) throw std::invalid_argument("ball radius must be non-negative");
  std::mt19937_64 rng(seed);
  std::vector<Vector> points;
  points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (ball.radius == 0.0) {
      points.push_back(ball.center);
      continue;
    }
    points.push_back(ball.center + sample_offset(rng, ball.center.size(), ball.radius, ball.norm, mode));
  }
  return points;
}

nlohmann::json to_json(const OracleReport& report) {
  nlohmann::json details = nlohmann::json::array();
  for (const LayerViolation& v : report.details) {
    details.push_back({{"layer", v.layer},
                       {"neuron", v.neuron},
                       {"sample", v.sample},
                       {"value", v.value},
                       {"lower", v.lower},
                       {"upper", v.upper},
                       {"excess", v.excess}});
  }
  return {{"oracle", report.oracle},
          {"seed", report.seed},
          {"samples", report.samples},
          {"violations", report.violations},
          {"max_violation", report.max_violation},
          {"details", std::move(details)}};
}

OracleReport soundness_check(const Network& net, const std::vector<LayerBounds>& bounds,
                             const PerturbationBall& ball, std::size_t n, std::uint64_t seed,
                             double tolerance) {
  if (bounds.size() != net.num_layers() + 1) {
    throw DimensionError("soundness_check needs bounds for the input and every layer");
  }
  constexpr std::size_t kMaxDetails = 20;
  OracleReport report;
  report.oracle = "soundness";
  report.seed = seed;
  report.samples = n;
  const auto points = sample_ball(ball, n, seed);
  for (std::size_t s = 0; s < points.size(); ++s) {
    const auto trace = forward_trace(net, points[s]);
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const Vector& v = trace[k];
      const LayerBounds& b = bounds[k];
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double excess = std::max(b.lower[i] - v[i], v[i] - b.upper[i]);
        if (excess > tolerance) {
          ++report.violations;
          report.max_violation = std::max(report.max_violation, excess);
          if (report.details.size() < kMaxDetails) {
            report.details.push_back({k, static_cast<std::size_t>(i), s, v[i], b.lower[i],
                                      b.upper[i], excess});
          }
        }
      }
    }
  }
  return report;
}

namespace {

/// Euclidean projection of v onto the l1 ball of the given radius.
Vector project_l1(const Vector& v, double radius) {
  if (v.cwiseAbs().sum() <= radius) return v;
  std::vector<double> mags(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    cumulative += mags[i];
    const double t = (cumulative - radius) / static_cast<double>(i + 1);
    if (mags[i] > t) theta = t;
  }
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = std::copysign(std::max(std::abs(v[i]) - theta, 0.0), v[i]);
  }
  return out;
}

Vector project(const Vector& d, double radius, Norm p) {
  switch (p) {
    case Norm::Linf:
      return d.cwiseMax(-radius).cwiseMin(radius);
    case Norm::L2: {
      const double len = d.norm();
      return len > radius ? Vector(d * (radius / len)) : d;
    }
    case Norm::L1:
      return project_l1(d, radius);
  }
  return d;
}

class AttackSearch {
 public:
  AttackSearch(const Network& net, const Vector& x0, std::size_t label, Norm p,
               const AttackBudget& budget, std::uint64_t seed)
      : net_(net), x0_(x0), label_(label), p_(p), budget_(budget), seed_(seed) {}

  double margin(const Vector& x) {
    ++evals_;
    const Vector y = forward(net_, x);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      if (static_cast<std::size_t>(j) != label_) best = std::max(best, y[j]);
    }
    return y[static_cast<Eigen::Index>(label_)] - best;
  }

  bool adversarial(const Vector& x) {
    ++evals_;
    return argmax(forward(net_, x)) != label_;
  }

  /// Offset d with ||d||_p <= radius such that x0 + d is misclassified.
  std::optional<Vector> attack(double radius) {
    evals_ = 0;
    std::mt19937_64 rng(mix_seed(seed_, ++calls_));
    const Eigen::Index n = x0_.size();
    const std::size_t limit = budget_.evaluations_per_radius;

    // Projected descent along a finite-difference gradient of the margin.
    Vector d = Vector::Zero(n);
    const double h = std::max(1e-6, 1e-4 * radius);
    for (int step = 0; step < 8 && evals_ + static_cast<std::size_t>(n) + 2 < limit; ++step) {
      const Vector x = x0_ + d;
      const double base = margin(x);
      Vector grad(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        Vector xi = x;
        xi[i] += h;
        grad[i] = (margin(xi) - base) / h;
      }
      if (grad.cwiseAbs().maxCoeff() == 0.0) break;
      Vector move(n);
      switch (p_) {
        case Norm::Linf:
          move = -radius * grad.unaryExpr([](double g) { return g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0); });
          break;
        case Norm::L2:
          move = -radius * grad / grad.norm();
          break;
        case Norm::L1: {
          Eigen::Index best = 0;
          grad.cwiseAbs().maxCoeff(&best);
          move = Vector::Zero(n);
          move[best] = grad[best] > 0 ? -radius : radius;
          break;
        }
      }
      const double scale = step == 0 ? 1.0 : 0.5;
      d = project(d + scale * move, radius, p_);
      if (adversarial(x0_ + d)) return d;
    }

    // Extreme points and random ball samples with the remaining budget.
    if (p_ == Norm::L1) {
      for (Eigen::Index i = 0; i < n && evals_ < limit; ++i) {
        for (double s : {radius, -radius}) {
          Vector e = Vector::Zero(n);
          e[i] = s;
          if (adversarial(x0_ + e)) return e;
        }
      }
    }
    const PerturbationBall ball{Vector::Zero(n), radius, p_};
    while (evals_ < limit) {
      const std::size_t chunk = std::min<std::size_t>(64, limit - evals_);
      for (const Vector& cand : sample_ball(ball, chunk, rng())) {
        if (adversarial(x0_ + cand)) return cand;
      }
    }
    return std::nullopt;
  }

 private:
  const Network& net_;
  const Vector& x0_;
  std::size_t label_;
  Norm p_;
  AttackBudget budget_;
  std::uint64_t seed_;
  std::size_t evals_ = 0;
  std::uint64_t calls_ = 0;
};

}  // namespace

double empirical_attack_radius(const Network& net, const Vector& x0, std::size_t label, Norm p,
                               const AttackBudget& budget, std::uint64_t seed) {
  if (label >= net.output_dim()) throw std::out_of_range("label out of range");
  if (argmax(forward(net, x0)) != label) return 0.0;
  if (net.output_dim() == 1) return kNoAttackFound;
  AttackSearch search(net, x0, label, p, budget, seed);

  // Coarse doubling pass.
  double lo = 0.0;
  double radius = 1e-3;
  std::optional<Vector> found;
  while (radius <= budget.max_radius) {
    found = search.attack(radius);
    if (found) break;
    lo = radius;
    radius *= 2.0;
  }
  if (!found) return kNoAttackFound;
  double hi = lp_norm(*found, p);

  // Fine pass: shrink the radius while attacks keep succeeding.
  for (int step = 0; step < budget.refine_steps && hi - lo > 1e-12 * hi; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (auto d = search.attack(mid)) {
      hi = std::min(hi, lp_norm(*d, p));
    } else {
      lo = mid;
    }
  }
  return hi;
}

double relaxation_area(const ScalarRelaxation& r) {
  const double ds = r.upper.slope - r.lower.slope;
  const double di = r.upper.intercept - r.lower.intercept;
  return (r.u - r.l) * (ds * 0.5 * (r.l + r.u) + di);
}

double integrate_affine_over_box(const Vector& coeffs, double intercept, const Vector& l,
                                 const Vector& u, std::size_t points_per_dim) {
  const auto n = static_cast<std::size_t>(l.size());
  if (coeffs.size() != l.size() || u.size() != l.size()) throw DimensionError("box/coefficient mismatch");
  if (points_per_dim < 2) throw std::invalid_argument("need at least two points per dimension");
  const double total = std::pow(static_cast<double>(points_per_dim), static_cast<double>(n));
  if (total > 1e7) throw std::invalid_argument("quadrature grid too large");

  std::vector<std::size_t> idx(n, 0);
  const double steps = static_cast<double>(points_per_dim - 1);
  double sum = 0.0;
  Vector x(l.size());
  while (true) {
    double weight = 1.0;
    for (std::size_t d = 0; d < n; ++d) {
      const auto e = static_cast<Eigen::Index>(d);
      const double h = (u[e] - l[e]) / steps;
      x[e] = l[e] + h * static_cast<double>(idx[d]);
      const bool end = idx[d] == 0 || idx[d] == points_per_dim - 1;
      weight *= end ? 0.5 * h : h;
    }
    sum += weight * (coeffs.dot(x) + intercept);
    std::size_t d = 0;
    while (d < n && ++idx[d] == points_per_dim) idx[d++] = 0;
    if (d == n) break;
  }
  return sum;
}

}  // namespace tilin
