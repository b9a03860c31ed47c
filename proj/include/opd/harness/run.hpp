#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opd/distill/cohort.hpp"
#include "opd/harness/config.hpp"
#include "opd/rl/evaluate.hpp"

namespace opd::harness {

/// Environment variable that overrides the default output root.
inline constexpr const char* kOutputRootEnv = "OPD_OUTPUT_ROOT";

struct MemberSummary {
  std::size_t member = 1;  // 1-based, as written to disk
  double final_return = 0.0;
  double best_return = 0.0;
  double final_max_return = 0.0;
};

/// One seed of one experiment, as persisted under `dir`.
struct RunArtifact {
  std::string dir;
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::vector<distill::MemberLogEntry> metrics;
  std::vector<MemberSummary> members;

  /// Mean over members of the final evaluation return.
  double cohort_final_mean() const;
  double cohort_best_mean() const;
};

/// `cli` if given, else $OPD_OUTPUT_ROOT, else "runs".
std::string output_root(const std::optional<std::string>& cli);

/// One sub-run per seed under root/<name>/seed_<s>. Validates the config
/// before any training starts.
std::vector<RunArtifact> run(const ExperimentConfig& config, const std::string& root);

/// A single seed written to `dir`: config.ini, metrics.csv, curve.csv,
/// summary.json, checkpoints/ and, for independent runs, rewards.csv.
RunArtifact run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir);

/// Reads metrics.csv and summary.json back from a run directory.
RunArtifact load_run(const std::string& dir);

/// Trailing mean over up to `window` most recent values.
std::vector<double> trailing_mean(std::span<const double> values, std::size_t window);

/// full, no_decision, no_feature and equal_weights arms of a cohort config.
std::vector<ExperimentConfig> ablation_arms(const ExperimentConfig& base);

struct AblationResult {
  std::vector<std::vector<RunArtifact>> arms;
  std::string comparison_dir;
};

/// Runs every arm under root/<name>_ablation/ and compares them.
AblationResult ablate(const ExperimentConfig& base, const std::string& root);

/// The metrics.csv header, fixed column order.
inline constexpr const char* kMetricsHeader =
    "step,member,eval_return_mean,eval_return_max,loss_rl,loss_decision,loss_feature,mean_pairwise_kl";

/// Shortest round-trip text form for doubles.
std::string format_real(double v);

}  // namespace opd::harness
