#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "nspnp/coupled.hpp"
#include "nspnp/fixed_point.hpp"
#include "nspnp/regularity.hpp"

namespace nspnp {

/// Contraction and Picard study driven by the `picard` command.
struct PicardSettings {
  int steps = 8;
  double dt = 1e-3;
  PicardConfig solver;
  double threshold_t_max = 1.0;  // bisection starts below this horizon
  double threshold_target = 0.5;
  int bisections = 20;
  double perturbation = 0.2;  // amplitude of the smooth charge perturbation
  bool frozen_drift = true;   // drift = initial velocity at every step

  void validate() const;
};

struct AnalysisSettings {
  RegularityConfig regularity;
  double lemma_constant = 100.0;
};

/// Everything one config file can set.
struct AppConfig {
  SimConfig sim;
  PicardSettings picard;
  AnalysisSettings analysis;

  /// Throws ConfigError naming the offending section and key.
  void validate() const;
};

/// INI text with sections grid, time, mollifier, initial, output, solver,
/// picard, regularity and run. Unknown sections or keys, malformed values
/// and failed validation all raise ConfigError.
AppConfig parse_config(std::istream& in);
AppConfig parse_config_text(const std::string& text);
/// Throws ConfigError naming the path when the file cannot be read.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace nspnp
