#include "tilin/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "tilin/oracle.hpp"

namespace tilin {

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TILIN_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw std::invalid_argument(std::string("TILIN_THREADS must be a positive integer, got '") + env +
                                "'");
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double improvement_pct(double baseline, double value) {
  if (baseline == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * (value - baseline) / baseline;
}

namespace {

std::vector<Norm> norms_of(const std::string& text, bool allow_all) {
  if (allow_all && text == "all") return {Norm::L1, Norm::L2, Norm::Linf};
  std::vector<Norm> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_norm(part));
  if (out.empty()) throw std::invalid_argument("no norm given");
  return out;
}

std::vector<AnchorPolicy> policies_of(const std::string& text) {
  std::vector<AnchorPolicy> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_policy(part));
  if (out.empty()) throw std::invalid_argument("no policy given");
  return out;
}

CertificationConfig config_of(const JobSpec& spec, Norm norm, AnchorPolicy policy) {
  CertificationConfig c;
  c.initial_eps = spec.eps0;
  c.iterations = spec.iterations;
  c.norm = norm;
  c.policy = policy;
  c.validate();
  return c;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json vec_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Writes to spec.out when set, otherwise to the given stream.
void emit(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string timing_path(const std::string& out) { return out + ".timing.json"; }

}  // namespace

LoadedJob load_job(const JobSpec& spec) {
  if (spec.model.empty()) throw std::invalid_argument("--model is required");
  if (spec.input.empty()) throw std::invalid_argument("--input is required");
  LoadedJob job{normalize(load_network(spec.model)), {}, {}, {}};
  const std::vector<Tensor> all = load_inputs(InputSource::parse(spec.input));
  if (spec.indices.empty()) {
    job.indices.resize(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) job.indices[i] = i;
  } else {
    job.indices = parse_indices(spec.indices);
  }
  std::optional<std::size_t> fixed_label;
  if (spec.label != "auto") {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(spec.label, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != spec.label.size() || v < 0) {
      throw std::invalid_argument("--label must be a non-negative integer or 'auto'");
    }
    fixed_label = static_cast<std::size_t>(v);
    if (*fixed_label >= job.net.output_dim()) {
      throw std::out_of_range("--label " + spec.label + " out of range for " +
                              std::to_string(job.net.output_dim()) + " outputs");
    }
  }
  for (std::size_t idx : job.indices) {
    if (idx >= all.size()) {
      throw std::out_of_range("input index " + std::to_string(idx) + " out of range (" +
                              std::to_string(all.size()) + " inputs)");
    }
    const Vector x = all[idx].flat();
    if (static_cast<std::size_t>(x.size()) != job.net.input_dim()) {
      throw DimensionError("input " + std::to_string(idx) + " has " + std::to_string(x.size()) +
                           " values, model expects " + std::to_string(job.net.input_dim()));
    }
    job.inputs.push_back(x);
    job.labels.push_back(fixed_label ? *fixed_label : argmax(forward(job.net, x)));
  }
  return job;
}

int cmd_verify(const JobSpec& spec, std::ostream& out, std::ostream& err) {
  const LoadedJob job = load_job(spec);
  const CertificationConfig config =
      config_of(spec, parse_norm(spec.norm), parse_policy(spec.policy));
  std::vector<CertificationReport> reports(job.inputs.size());
  parallel_for(job.inputs.size(), worker_count(spec.threads), [&](std::size_t i) {
    reports[i] = certified_radius(job.net, job.inputs[i], job.labels[i], config,
                                  std::to_string(job.indices[i]));
  });

  nlohmann::json doc = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::array();
  bool any_misclassified = false;
  for (const auto& r : reports) {
    doc.push_back(to_json(r, false));
    timing.push_back({{"input_id", r.input_id}, {"wall_time_sec", r.wall_time_sec}});
    any_misclassified = any_misclassified || r.misclassified;
  }
  emit(spec.out, out, doc.dump(2) + "\n");
  if (!spec.out.empty()) emit(timing_path(spec.out), out, timing.dump(2) + "\n");
  if (any_misclassified) {
    err << "warning: misclassified input(s) reported with eps_cert = 0\n";
    if (spec.strict) return kExitMisclassified;
  }
  return kExitOk;
}

int cmd_bounds(const JobSpec& spec, std::ostream& out, std::ostream& /*err*/) {
  if (!spec.eps) throw std::invalid_argument("bounds needs --eps");
  if (!(*spec.eps >= 0.0) || !std::isfinite(*spec.eps)) {
    throw std::invalid_argument("--eps must be finite and non-negative");
  }
  const LoadedJob job = load_job(spec);
  const Norm norm = parse_norm(spec.norm);
  const AnchorPolicy policy = parse_policy(spec.policy);
  std::vector<nlohmann::json> items(job.inputs.size());
  parallel_for(job.inputs.size(), worker_count(spec.threads), [&](std::size_t i) {
    const PerturbationBall ball{job.inputs[i], *spec.eps, norm};
    const NetworkBounds nb = compute_all_bounds(job.net, ball, policy);
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t k = 0; k < nb.layers.size(); ++k) {
      layers.push_back({{"layer", k},
                        {"type", k == 0 ? "input" : layer_type_name(job.net.layers()[k - 1])},
                        {"lower", vec_json(nb.layers[k].lower)},
                        {"upper", vec_json(nb.layers[k].upper)}});
    }
    items[i] = {{"input_id", std::to_string(job.indices[i])},
                {"label", job.labels[i]},
                {"eps", *spec.eps},
                {"norm", to_string(norm)},
                {"policy", to_string(policy)},
                {"robust", is_robust(nb.output(), job.labels[i])},
                {"layers", std::move(layers)}};
  });
  emit(spec.out, out, nlohmann::json(items).dump(2) + "\n");
  return kExitOk;
}

int cmd_compare(const JobSpec& spec, std::ostream& out, std::ostream& err) {
  const LoadedJob job = load_job(spec);
  const std::vector<Norm> norms = norms_of(spec.norm, true);
  const std::vector<AnchorPolicy> policies = policies_of(spec.policies);
  const AnchorPolicy baseline = parse_policy(spec.baseline);
  if (std::find(policies.begin(), policies.end(), baseline) == policies.end()) {
    throw std::invalid_argument("--baseline " + spec.baseline + " is not among --policies");
  }

  struct Row {
    std::size_t input = 0;
    AnchorPolicy policy{};
    Norm norm{};
    CertificationReport report;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < job.inputs.size(); ++i) {
    for (Norm n : norms) {
      for (AnchorPolicy p : policies) rows.push_back({i, p, n, {}});
    }
  }
  parallel_for(rows.size(), worker_count(spec.threads), [&](std::size_t r) {
    Row& row = rows[r];
    row.report = certified_radius(job.net, job.inputs[row.input], job.labels[row.input],
                                  config_of(spec, row.norm, row.policy),
                                  std::to_string(job.indices[row.input]));
  });

  auto baseline_eps = [&](const Row& row) {
    for (const Row& b : rows) {
      if (b.input == row.input && b.norm == row.norm && b.policy == baseline) {
        return b.report.eps_cert;
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };

  std::ostringstream csv;
  csv << "input,method,norm,eps_cert,time,improvement_pct\n";
  struct Acc {
    std::size_t count = 0;
    double eps = 0.0, time = 0.0, impr = 0.0;
    std::size_t impr_count = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> summary;
  for (const Row& row : rows) {
    const double impr = improvement_pct(baseline_eps(row), row.report.eps_cert);
    csv << job.indices[row.input] << ',' << to_string(row.policy) << ',' << to_string(row.norm)
        << ',' << fmt(row.report.eps_cert) << ',' << fmt(row.report.wall_time_sec) << ','
        << fmt(impr) << '\n';
    if (row.report.misclassified) continue;
    Acc& a = summary[{to_string(row.policy), to_string(row.norm)}];
    ++a.count;
    a.eps += row.report.eps_cert;
    a.time += row.report.wall_time_sec;
    if (!std::isnan(impr)) {
      a.impr += impr;
      ++a.impr_count;
    }
  }
  emit(spec.out, out, csv.str());

  std::ostringstream sum;
  sum << "method,norm,inputs,avg_eps_cert,avg_time,avg_improvement_pct\n";
  for (AnchorPolicy p : policies) {
    for (Norm n : norms) {
      const auto it = summary.find({to_string(p), to_string(n)});
      const Acc a = it == summary.end() ? Acc{} : it->second;
      const double c = static_cast<double>(a.count);
      sum << to_string(p) << ',' << to_string(n) << ',' << a.count << ','
          << fmt(a.count ? a.eps / c : std::nan("")) << ','
          << fmt(a.count ? a.time / c : std::nan("")) << ','
          << fmt(a.impr_count ? a.impr / static_cast<double>(a.impr_count) : std::nan("")) << '\n';
    }
  }
  emit(spec.summary, err, sum.str());
  return kExitOk;
}

int cmd_oracle_check(const JobSpec& spec, std::ostream& out, std::ostream& err) {
  const LoadedJob job = load_job(spec);
  const Norm norm = parse_norm(spec.norm);
  const CertificationConfig config = config_of(spec, norm, parse_policy(spec.policy));
  if (spec.samples == 0) throw std::invalid_argument("--samples must be positive");

  std::vector<nlohmann::json> items(job.inputs.size());
  std::vector<char> failed(job.inputs.size(), 0);
  parallel_for(job.inputs.size(), worker_count(spec.threads), [&](std::size_t i) {
    const std::string id = std::to_string(job.indices[i]);
    const CertificationReport rep =
        certified_radius(job.net, job.inputs[i], job.labels[i], config, id);
    const double attack = empirical_attack_radius(job.net, job.inputs[i], job.labels[i], norm, {},
                                                  spec.seed + job.indices[i]);
    const bool ordered = rep.eps_cert <= attack;

    std::vector<double> radii;
    if (rep.eps_cert > 0.0) radii.push_back(rep.eps_cert);
    if (spec.eps && *spec.eps > 0.0) radii.push_back(*spec.eps);
    nlohmann::json checks = nlohmann::json::array();
    bool sound = true;
    for (double eps : radii) {
      const PerturbationBall ball{job.inputs[i], eps, norm};
      const NetworkBounds nb = compute_all_bounds(job.net, ball, config.policy);
      const OracleReport orc =
          soundness_check(job.net, nb.layers, ball, spec.samples, spec.seed + job.indices[i]);
      sound = sound && orc.ok();
      nlohmann::json j = to_json(orc);
      j["eps"] = eps;
      checks.push_back(std::move(j));
    }
    failed[i] = !(ordered && sound);
    items[i] = {{"input_id", id},
                {"label", job.labels[i]},
                {"eps_cert", rep.eps_cert},
                {"attack_radius", std::isfinite(attack) ? nlohmann::json(attack) : nlohmann::json(nullptr)},
                {"certified_le_attack", ordered},
                {"soundness", std::move(checks)},
                {"ok", !failed[i]}};
  });
  emit(spec.out, out, nlohmann::json(items).dump(2) + "\n");
  const auto bad = std::count(failed.begin(), failed.end(), 1);
  if (bad > 0) {
    err << "oracle-check: " << bad << " input(s) with violations\n";
    return kExitViolation;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tilin: robustness certification by tight linear relaxation"};
  app.require_subcommand(1);
  JobSpec spec;
  double eps = 0.0;

  const std::vector<std::string> norm_choices{"1", "2", "inf"};
  const std::vector<std::string> policy_choices{"forward", "midpoint"};
  auto common = [&](CLI::App* sub, bool norm_all) {
    sub->add_option("--model", spec.model, "Model JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--input", spec.input, "Inputs: PATH[:json|csv|idx]")->required();
    sub->add_option("--indices", spec.indices, "Input selection, e.g. 0..9 or 0,4,7");
    sub->add_option("--label", spec.label, "Label INT or auto (forward argmax)");
    auto choices = norm_choices;
    if (norm_all) choices.push_back("all");
    sub->add_option("--norm", spec.norm, "Perturbation norm")->check(CLI::IsMember(choices));
    sub->add_option("--iters", spec.iterations, "Binary-search iterations")
        ->check(CLI::PositiveNumber);
    sub->add_option("--eps0", spec.eps0, "Initial radius")->check(CLI::PositiveNumber);
    sub->add_option("--seed", spec.seed, "Seed for sampling oracles");
    sub->add_option("--out", spec.out, "Output file (default stdout)");
    sub->add_flag("--strict", spec.strict, "Exit 2 when an input is misclassified");
    sub->add_option("--threads", spec.threads, "Worker threads (default TILIN_THREADS)");
  };
  auto policy_opt = [&](CLI::App* sub) {
    sub->add_option("--policy", spec.policy, "Anchor policy")->check(CLI::IsMember(policy_choices));
  };

  CLI::App* verify = app.add_subcommand("verify", "Certified radius per input (JSON)");
  common(verify, false);
  policy_opt(verify);

  CLI::App* bounds = app.add_subcommand("bounds", "Per-layer bounds at a fixed radius (JSON)");
  common(bounds, false);
  policy_opt(bounds);
  bounds->add_option("--eps", eps, "Radius")->required()->check(CLI::NonNegativeNumber);

  CLI::App* compare = app.add_subcommand("compare", "Radii across policies and norms (CSV)");
  common(compare, true);
  compare->add_option("--policies", spec.policies, "Comma-separated policies");
  compare->add_option("--baseline", spec.baseline, "Policy used as improvement baseline")
      ->check(CLI::IsMember(policy_choices));
  compare->add_option("--summary", spec.summary, "Summary CSV path (default stderr)");

  CLI::App* oracle = app.add_subcommand("oracle-check", "Sampling and attack oracles");
  common(oracle, false);
  policy_opt(oracle);
  oracle->add_option("--samples", spec.samples, "Ball samples per radius")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--eps", eps, "Extra radius to check")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (verify->parsed()) return cmd_verify(spec, out, err);
    if (bounds->parsed()) {
      spec.eps = eps;
      return cmd_bounds(spec, out, err);
    }
    if (compare->parsed()) return cmd_compare(spec, out, err);
    if (oracle->count("--eps") > 0) spec.eps = eps;
    return cmd_oracle_check(spec, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace tilin
