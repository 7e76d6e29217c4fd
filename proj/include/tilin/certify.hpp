#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilin/propagate.hpp"

namespace tilin {

struct CertificationConfig {
  double initial_eps = 0.05;
  int iterations = 15;
  Norm norm = Norm::Linf;
  AnchorPolicy policy = AnchorPolicy::ForwardValue;

  void validate() const;
};

struct TraceEntry {
  double eps = 0.0;
  bool robust = false;
  double gamma_l_t = 0.0;
  double max_gamma_u = 0.0;
  /// Log-radius bracket after this step's update.
  double log_eps_min = 0.0;
  double log_eps_max = 0.0;
};

struct CertificationReport {
  std::string input_id;
  std::size_t label = 0;
  /// exp of the largest log-radius proven robust; 0 when nothing was proven.
  double eps_cert = 0.0;
  /// exp of the search variable after the final update.
  double eps_last = 0.0;
  bool misclassified = false;
  bool unproven = false;
  /// The network has a single output, so robustness holds vacuously.
  bool no_competitor = false;
  std::string method = "ti-lin";
  CertificationConfig config;
  std::vector<TraceEntry> trace;
  double wall_time_sec = 0.0;
};

/// gamma_L[t] >= max_{j != t} gamma_U[j]. Throws std::out_of_range for a bad label.
bool is_robust(const LayerBounds& output, std::size_t label);

/// Log-space search for the largest certifiable radius. A non-normalized
/// `net` is normalized first.
CertificationReport certified_radius(const Network& net, const Vector& x0, std::size_t label,
                                     const CertificationConfig& config,
                                     const std::string& input_id = "");

/// Report JSON. wall_time_sec is included only when `with_timing` is set.
nlohmann::json to_json(const CertificationReport& report, bool with_timing = true);

}  // namespace tilin
