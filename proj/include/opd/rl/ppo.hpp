#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "opd/numerics/tensor.hpp"

namespace opd::rl {

/// One rollout segment. `next_values` holds V(s_{t+1}) for non-final steps,
/// the bootstrap value at the segment end or at a truncation, and is ignored
/// after a true terminal.
struct RolloutBatch {
  std::vector<std::vector<double>> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminated;   // true terminal state reached
  std::vector<std::uint8_t> episode_end;  // terminal or truncated
  std::vector<double> old_log_probs;
  std::vector<double> values;
  std::vector<double> next_values;
  // Filled by compute_advantages.
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return rewards.size(); }
  /// UsageError when the per-step arrays disagree in length.
  void validate() const;
};

struct AdvantageEstimate {
  std::vector<double> advantages;  // raw GAE values
  std::vector<double> returns;     // advantages + values
};

/// Generalized advantage estimation truncated at episode ends.
AdvantageEstimate generalized_advantages(const RolloutBatch& rollout, double gamma, double lambda);

/// Zero-mean unit-variance rescaling; only centered when variance < 1e-8.
std::vector<double> normalize_advantages(std::span<const double> advantages);

/// Fills rollout.advantages (normalized when requested) and rollout.returns,
/// which are always built from the raw estimate. UsageError on an empty
/// rollout, ParameterError for gamma or lambda outside (0, 1].
void compute_advantages(RolloutBatch& rollout, double gamma, double lambda, bool normalize = true);

/// -mean(min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)), rho = exp(new - old).
/// NumericError when a ratio is non-finite.
num::Tensor ppo_actor_loss(const num::Tensor& new_log_probs, std::span<const double> old_log_probs,
                           std::span<const double> advantages, double clip);

/// mean((V - R)^2); UsageError on a length mismatch.
num::Tensor ppo_critic_loss(const num::Tensor& values, std::span<const double> returns);

}  // namespace opd::rl
