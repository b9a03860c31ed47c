#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "opd/distill/cohort.hpp"
#include "opd/rl/train.hpp"

namespace opd::harness {

/// Sectioned key/value text:
///
///     # comment
///     [experiment]
///     algorithm = dqn
///
/// Keys outside any section land in section "". Duplicate keys are errors.
class IniDocument {
 public:
  static IniDocument parse(const std::string& text);
  static IniDocument load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct AblationFlags {
  bool no_decision_loss = false;
  bool no_feature_loss = false;
  bool independent = false;
  bool operator==(const AblationFlags&) const = default;
};

/// Everything needed to reproduce a run. Independent runs have cohort_size 1.
struct ExperimentConfig {
  std::string name = "experiment";
  rl::TrainOptions train;
  std::size_t cohort_size = 3;
  std::vector<std::uint64_t> seeds{0};
  distill::LossCoefficients coefficients;
  double temperature = 1.0;
  distill::AttentionMode attention = distill::AttentionMode::kDecisionAttention;
  std::int64_t distill_warmup = 0;
  AblationFlags ablation;
  std::size_t smoothing_window = 50;
  bool save_checkpoints = true;

  /// ConfigError on inconsistent or out-of-range settings.
  void validate() const;
  /// Cohort options with ablation flags folded into the coefficients.
  distill::CohortOptions cohort_options() const;
};

/// Unknown sections or keys are ConfigErrors, so typos cannot silently fall
/// back to defaults.
ExperimentConfig config_from_ini(const IniDocument& doc);
ExperimentConfig load_config(const std::string& path);
/// Canonical text form; config_from_ini(parse(to_ini(c))) reproduces c.
std::string to_ini(const ExperimentConfig& config);

}  // namespace opd::harness
