#include "tilin/certify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tilin {

void CertificationConfig::validate() const {
  if (!(initial_eps > 0.0) || !std::isfinite(initial_eps)) {
    throw std::invalid_argument("initial radius must be positive");
  }
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
}

namespace {

double max_competitor(const LayerBounds& output, std::size_t label) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < output.upper.size(); ++j) {
    if (static_cast<std::size_t>(j) != label) best = std::max(best, output.upper[j]);
  }
  return best;
}

}  // namespace

bool is_robust(const LayerBounds& output, std::size_t label) {
  if (label >= static_cast<std::size_t>(output.lower.size())) {
    throw std::out_of_range("label " + std::to_string(label) + " out of range for " +
                            std::to_string(output.lower.size()) + " outputs");
  }
  return output.lower[static_cast<Eigen::Index>(label)] >= max_competitor(output, label);
}

CertificationReport certified_radius(const Network& net, const Vector& x0, std::size_t label,
                                     const CertificationConfig& config,
                                     const std::string& input_id) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  CertificationReport report;
  report.input_id = input_id;
  report.label = label;
  report.config = config;
  if (label >= net.output_dim()) {
    throw std::out_of_range("label " + std::to_string(label) + " out of range for " +
                            std::to_string(net.output_dim()) + " outputs");
  }
  report.no_competitor = net.output_dim() == 1;
  const Network work = net.is_normalized() ? net : normalize(net);

  if (argmax(forward(net, x0)) != label) {
    report.misclassified = true;
    report.unproven = true;
  } else {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double log_eps = std::log(config.initial_eps);
    double log_min = -inf;
    double log_max = inf;
    for (int i = 0; i < config.iterations; ++i) {
      const PerturbationBall ball{x0, std::exp(log_eps), config.norm};
      const NetworkBounds bounds = compute_all_bounds(work, ball, config.policy);
      const LayerBounds& out = bounds.output();
      TraceEntry entry;
      entry.eps = ball.radius;
      entry.gamma_l_t = out.lower[static_cast<Eigen::Index>(label)];
      entry.max_gamma_u = max_competitor(out, label);
      entry.robust = is_robust(out, label);
      if (entry.robust) {
        log_min = log_eps;
        log_eps = std::min(log_eps + 1.0, 0.5 * (log_max + log_min));
      } else {
        log_max = log_eps;
        log_eps = std::max(log_eps - 1.0, 0.5 * (log_max + log_min));
      }
      entry.log_eps_min = log_min;
      entry.log_eps_max = log_max;
      report.trace.push_back(entry);
    }
    report.eps_last = std::exp(log_eps);
    report.unproven = !std::isfinite(log_min);
    report.eps_cert = report.unproven ? 0.0 : std::exp(log_min);
  }
  report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json to_json(const CertificationReport& report, bool with_timing) {
  nlohmann::json trace = nlohmann::json::array();
  for (const TraceEntry& e : report.trace) {
    trace.push_back({{"eps", e.eps},
                     {"robust", e.robust},
                     {"gamma_l_t", e.gamma_l_t},
                     {"max_gamma_u", std::isfinite(e.max_gamma_u) ? nlohmann::json(e.max_gamma_u)
                                                                  : nlohmann::json(nullptr)}});
  }
  nlohmann::json j = {
      {"input_id", report.input_id},
      {"label", report.label},
      {"eps_cert", report.eps_cert},
      {"eps_last", report.eps_last},
      {"method", report.method},
      {"policy", to_string(report.config.policy)},
      {"norm", to_string(report.config.norm)},
      {"iterations", report.config.iterations},
      {"eps0", report.config.initial_eps},
      {"misclassified", report.misclassified},
      {"unproven", report.unproven},
      {"no_competitor", report.no_competitor},
      {"trace", std::move(trace)},
  };
  if (with_timing) j["wall_time_sec"] = report.wall_time_sec;
  return j;
}

}  // namespace tilin
