#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilin/certify.hpp"
#include "tilin/inputs.hpp"

namespace tilin {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitMisclassified = 2,
  kExitViolation = 3,
};

struct JobSpec {
  std::string subcommand;
  std::string model;
  std::string input;
  std::string indices;            // empty: every input
  std::string label = "auto";     // INT or "auto"
  std::string norm = "inf";       // 1 | 2 | inf (compare also accepts "all")
  std::string policy = "forward";
  int iterations = 15;
  double eps0 = 0.05;
  std::uint64_t seed = 0;
  std::string out;                // empty: stdout
  bool strict = false;

  // bounds / oracle-check
  std::optional<double> eps;
  // compare / oracle-check
  std::string policies = "forward,midpoint";
  std::string baseline = "forward";
  std::size_t samples = 10000;
  std::string summary;            // compare: summary CSV path, empty for stderr

  std::size_t threads = 0;        // 0: TILIN_THREADS or hardware concurrency
};

/// Worker count: explicit value, else TILIN_THREADS, else hardware concurrency.
std::size_t worker_count(std::size_t requested);

/// Runs job(i) for i in [0, n) on a pool of `workers` threads. Exceptions are
/// rethrown on the caller thread (lowest index first).
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

/// 100 (value - baseline) / baseline; NaN for a zero baseline.
double improvement_pct(double baseline, double value);

struct LoadedJob {
  Network net;                       // normalized
  std::vector<std::size_t> indices;  // positions in the input file
  std::vector<Vector> inputs;
  std::vector<std::size_t> labels;
};

/// Loads model + inputs, checks dimensions, resolves labels. Throws on errors.
LoadedJob load_job(const JobSpec& spec);

/// Each returns the process exit code; reports go to `out` unless spec.out is set.
int cmd_verify(const JobSpec& spec, std::ostream& out, std::ostream& err);
int cmd_bounds(const JobSpec& spec, std::ostream& out, std::ostream& err);
int cmd_compare(const JobSpec& spec, std::ostream& out, std::ostream& err);
int cmd_oracle_check(const JobSpec& spec, std::ostream& out, std::ostream& err);

/// Full command line (argv[0] included). Usage errors give kExitError.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tilin
