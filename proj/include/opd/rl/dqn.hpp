#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "opd/numerics/rng.hpp"
#include "opd/numerics/tensor.hpp"
#include "opd/policy/network.hpp"
#include "opd/rl/replay_buffer.hpp"

namespace opd::rl {

using TransitionBatch = std::span<const Transition* const>;

/// Temporal-difference targets r + gamma * max_a' Q_target(s', a') * (1 - done),
/// computed without recording history.
std::vector<double> dqn_targets(const policy::PolicyNetwork& target_net, TransitionBatch batch, double gamma);

/// Mean squared TD error of Q_online(s, a) against constant targets.
num::Tensor dqn_loss_from(const num::Tensor& q_online, TransitionBatch batch, std::span<const double> targets);

/// Full squared Bellman error. The target network receives no gradient.
/// Throws UsageError for an empty batch, ParameterError for gamma outside (0, 1].
num::Tensor dqn_loss(const policy::PolicyNetwork& online, const policy::PolicyNetwork& target, TransitionBatch batch,
                     double gamma);

/// Hard parameter copy; UsageError on architecture mismatch.
void sync_target(const policy::PolicyNetwork& online, policy::PolicyNetwork& target);

/// Copies online into target whenever step is a multiple of `every`.
class TargetSchedule {
 public:
  explicit TargetSchedule(std::int64_t every = 500);
  bool maybe_sync(std::int64_t step, const policy::PolicyNetwork& online, policy::PolicyNetwork& target) const;
  std::int64_t every() const { return every_; }

 private:
  std::int64_t every_;
};

/// Index of the largest value; lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Greedy with probability 1 - eps, uniform otherwise.
std::size_t epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng);

/// Linear anneal from `start` at step 0 to `end` at `horizon`, constant after.
double linear_epsilon(std::int64_t step, double start, double end, std::int64_t horizon);

}  // namespace opd::rl
