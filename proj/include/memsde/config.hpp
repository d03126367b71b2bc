#pragma once

// Run configuration: an INI-style file with [section] headers, `key = value`
// lines, comma-separated lists and '#' comments. See docs/config.md.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memsde/drift.hpp"
#include "memsde/history.hpp"

namespace memsde {

struct ConfigIssue {
  std::size_t line = 0;  // 0 when the issue is not tied to a line
  std::string field;     // "section.key"
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

struct DriftConfig {
  std::string family = "ou";
  double b = 1.0;
  double epsilon = 0.5;
  double kappa = 0.0;
  double lambda = 1.0;
  std::size_t dimension = 1;
  std::vector<double> direction;
  /// Names of [drift.NAME] sections summed by the composite family.
  std::vector<std::string> components;
  bool operator==(const DriftConfig&) const = default;
};

struct SimConfig {
  double T = 10.0;
  double dt = 0.01;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::optional<double> stopping_radius;
  /// Stored window length T_w.
  double window = 0.0;
  std::string past = "zero";
  std::string mode = "uniform_time";
  std::string observable = "state";
  std::uint64_t trajectory = 0;
  /// Used when neither --threads nor MEMSDE_THREADS is given; 0 = all cores.
  std::size_t threads = 1;
  bool operator==(const SimConfig&) const = default;
};

struct ChecksConfig {
  std::vector<double> z = {0.5, 1.0, 2.0};
  std::vector<double> dt_gaps = {0.05, 0.1};
  double t1 = 10.0;
  std::size_t tail_ensemble = 10000;
  double delta = 0.1;
  double delta0 = 0.05;
  double k_window = 4.0;
  double allowed_fraction = 0.01;
  std::size_t projections = 64;
  std::size_t bootstrap = 200;
  double sigmas = 3.0;
  double domain_bound = 1.0;
  std::size_t samples = 10000;
  std::uint64_t sampler_seed = 1;
  bool operator==(const ChecksConfig&) const = default;
};

struct GirsanovConfig {
  bool present = false;
  std::string x_past = "zero";
  std::string y_past = "zero";
  double lambda_prime = 0.5;
  double k_prime = 0.0;
  /// Kernel rate used in the bound; defaults to drift.lambda.
  std::optional<double> lambda;
  double horizon = 5.0;
  std::size_t paths = 0;
  double slack = 0.01;
  bool operator==(const GirsanovConfig&) const = default;
};

struct CouplingConfig {
  bool present = false;
  std::string past_1 = "zero";
  std::string past_2 = "zero";
  double window = 1.0;
  double bound = 10.0;
  std::size_t coordinate = 0;
  std::size_t replicates = 0;
  double factor = 2.0;
  bool operator==(const CouplingConfig&) const = default;
};

/// x(s) = sum_j amplitude_j exp(rate_j |s|); `terms` lists each amplitude
/// vector followed by its rate.
struct PastConfig {
  std::vector<double> terms;
  bool operator==(const PastConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv", "json", "dat"};
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  DriftConfig drift;
  std::map<std::string, DriftConfig> drift_parts;
  SimConfig sim;
  ChecksConfig checks;
  GirsanovConfig girsanov;
  CouplingConfig coupling;
  std::map<std::string, PastConfig> pasts;
  OutputConfig output;
  bool operator==(const RunConfig&) const = default;

  bool emits(const std::string& format) const;
};

/// Throws ConfigError listing every problem found.
RunConfig parse_config(const std::string& text);
/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);
/// Re-runs the constraint checks (used after command-line overrides).
void validate_config(const RunConfig& config);

DriftSpec build_drift(const RunConfig& config);
/// Kernel rate of the drift (the largest one, if there are several); nullopt for OU.
std::optional<double> drift_rate(const RunConfig& config);
/// "zero" or a [past.NAME] section, sampled on the grid with the configured window.
PastHistory build_past(const RunConfig& config, const std::string& name);

}  // namespace memsde
