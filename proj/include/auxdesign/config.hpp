#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auxdesign/ace.hpp"
#include "auxdesign/utilities.hpp"

namespace auxdesign {

inline constexpr int kSchemaVersion = 1;

enum class Evaluator { Aux, NestedAux, NestedExact };

Evaluator evaluator_from_name(std::string_view name);
std::string evaluator_name(Evaluator e);

/// One experiment, read from a TOML file. Defaults follow the paper's
/// full-scale settings.
struct ExperimentConfig {
  int schema = kSchemaVersion;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// One key for parameter estimation, several for model comparison.
  std::vector<std::string> models;
  std::vector<double> model_probs;
  std::vector<Interval> bounds;          // empty: the model's design window
  std::optional<double> min_spacing;     // overrides the model's spacing on coordinate 0

  std::string family = "normal";
  std::size_t M = 500;
  std::size_t N = 10000;
  std::size_t L = 500;
  int mgp_multistarts = 10;
  double max_failure_rate = 0.2;
  CopulaDensity copula_density = CopulaDensity::Standard;

  bool diagnostics = true;
  std::size_t M0 = 100;
  std::size_t N0 = 10000;
  bool coupled_check = true;

  UtilityKind utility = UtilityKind::SIG;
  std::vector<std::size_t> n{15};

  AceConfig ace;

  std::vector<Evaluator> evaluators{Evaluator::Aux};
  std::size_t eval_B = 1000;
  std::size_t eval_C = 1000;
  std::size_t replicates = 20;

  bool comparison() const { return is_model_utility(utility); }

  /// Schema checks that need no simulation. Throws ConfigError.
  void validate() const;
  /// Canonical text of every field that influences results.
  std::string canonical() const;
};

/// Parses and validates; unknown tables or keys are errors.
ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace auxdesign
