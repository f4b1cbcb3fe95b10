#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "auxdesign/config.hpp"
#include "auxdesign/diagnostics.hpp"

namespace auxdesign {

/// Replicated expected-utility estimates of one design under one evaluator.
struct EvaluationTable {
  Evaluator evaluator = Evaluator::Aux;
  std::vector<double> estimates;
  std::vector<double> within_se;
  double mean = 0.0;
  /// Standard error over replicates; absent for a single replicate.
  std::optional<double> se;
  UtilityEvaluation first;
};

struct DiagnosticsOutcome {
  std::vector<AdequacyReport> reports;
  bool passed = true;
};

struct DesignOutcome {
  std::size_t n = 0;
  Design ace;
  double ace_estimate = 0.0;
  std::optional<Design> baseline;
  std::map<std::string, EvaluationTable> ace_evals, baseline_evals;
};

/// Staged experiment over an output directory:
///   emulators/  cached auxiliary models, keyed by a content hash
///   diagnostics/ adequacy CSV + JSON per check
///   designs/    ACE and baseline designs
///   traces/     ACE traces and evaluation tables
///   summary.json (deterministic) and timings.json (wall clock)
class Experiment {
 public:
  Experiment(ExperimentConfig config, std::string out_dir);

  const ExperimentConfig& config() const { return config_; }
  const DesignSpace& space() const { return space_; }
  const std::string& out_dir() const { return out_; }

  /// Hex content hash of everything that determines an emulator.
  std::string emulator_hash(const std::string& role) const;
  /// Builds or reloads the auxiliary models. Returns true when every emulator came from the cache.
  bool build_aux();
  DiagnosticsOutcome diagnose();
  AceResult design(std::size_t n);
  EvaluationTable evaluate(const Design& D, Evaluator evaluator, std::size_t replicates);
  /// Equally spaced for one design variable, a maximin Latin hypercube otherwise.
  Design baseline_design(std::size_t n) const;
  std::string baseline_label() const;
  std::vector<CostRow> benchmark(std::size_t n, const std::vector<std::size_t>& inner_sizes);

  /// All stages in order. Returns 0 on success, 2 when the adequacy gate fails
  /// and `force` is off (no design stage is run in that case).
  int run(bool force);

  const EstimationProblem& estimation() const { return estimation_; }
  const ComparisonProblem& comparison() const { return comparison_; }

  void write_timings() const;

 private:
  std::string path(const std::string& rel) const;
  UtilitySampler utility_sampler() const;
  void write_summary(const DiagnosticsOutcome* diag, const std::vector<DesignOutcome>& designs) const;

  ExperimentConfig config_;
  std::string out_;
  DesignSpace space_;
  EstimationProblem estimation_;
  ComparisonProblem comparison_;
  bool built_ = false;
  std::map<std::string, double> timings_;
};

std::string evaluation_table_json(const EvaluationTable& t);
/// Columns: replicate, estimate, se.
void write_evaluation_table_csv(std::ostream& out, const EvaluationTable& t);
/// Columns: B, C, aux_seconds, nested_seconds, ratio.
void write_benchmark_csv(std::ostream& out, const std::vector<CostRow>& rows);

}  // namespace auxdesign
