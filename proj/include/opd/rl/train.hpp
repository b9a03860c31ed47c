#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opd/envs/environment.hpp"
#include "opd/numerics/adam.hpp"
#include "opd/numerics/rng.hpp"
#include "opd/policy/network.hpp"
#include "opd/rl/dqn.hpp"
#include "opd/rl/ppo.hpp"
#include "opd/rl/replay_buffer.hpp"

namespace opd::rl {

struct DqnOptions {
  double learning_rate = 1e-3;
  double gamma = 0.99;
  std::size_t batch_size = 64;
  std::size_t warmup = 1'000;
  std::size_t buffer_capacity = 50'000;
  std::int64_t target_sync = 500;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t eps_horizon = 10'000;
  double max_grad_norm = 0.0;
};

struct PpoOptions {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  std::size_t rollout = 2'048;
  std::size_t epochs = 4;
  std::size_t minibatch = 256;
  double clip = 0.2;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  bool anneal_lr = false;
};

struct TrainOptions {
  policy::Algorithm algorithm = policy::Algorithm::kDqn;
  std::string env_id = "catch";
  env::EnvOptions env;
  std::vector<std::size_t> hidden{64, 64};
  std::int64_t budget = 50'000;  // environment steps
  std::int64_t eval_interval = 5'000;
  std::size_t eval_episodes = 100;
  DqnOptions dqn;
  PpoOptions ppo;
};

/// Loss values of one optimizer step, before coefficient weighting except
/// for `total`.
struct LossTerms {
  double rl = 0.0;
  double decision = 0.0;
  double feature = 0.0;
  double total = 0.0;
};

/// Replaces the reinforcement-learning loss by a combined objective. Receives
/// the student's recorded forward pass, the batch states it was computed on,
/// and the RL loss; returns the loss to differentiate and fills `terms`.
using LossHook = std::function<num::Tensor(const policy::ForwardResult& student, const num::Tensor& states,
                                           const num::Tensor& rl_loss, LossTerms& terms)>;

policy::Architecture architecture_for(const TrainOptions& options, const env::Environment& env);

/// Stream identifiers for derive_seed.
enum SeedStream : std::uint64_t {
  kEnvStream = 1,
  kEvalStream = 2,
  kReplayStream = 3,
  kActStream = 4,
  kShuffleStream = 5,
};

/// Online and target networks with their optimizer.
class DqnLearner {
 public:
  DqnLearner(const policy::Architecture& arch, const DqnOptions& options, std::uint64_t seed);
  DqnLearner(const DqnLearner&) = delete;
  DqnLearner& operator=(const DqnLearner&) = delete;
  DqnLearner(DqnLearner&&) = default;

  /// Epsilon-greedy action at the given global step.
  std::size_t act(const std::vector<double>& observation, std::int64_t step, Rng& rng) const;
  /// One optimizer step on `batch`; `hook` may extend the objective.
  LossTerms update(TransitionBatch batch, const LossHook& hook = {});
  /// Target sync check; call once per environment step after updates.
  void end_step(std::int64_t step);

  const policy::PolicyNetwork& online() const { return online_; }
  policy::PolicyNetwork& online() { return online_; }
  const policy::PolicyNetwork& target() const { return target_; }

 private:
  DqnOptions options_;
  policy::PolicyNetwork online_;
  policy::PolicyNetwork target_;
  num::Adam optimizer_;
  TargetSchedule schedule_;
};

/// Actor-critic network, its optimizer, and its own environment copy.
class PpoLearner {
 public:
  PpoLearner(const policy::Architecture& arch, const PpoOptions& options, const env::Environment& env,
             std::uint64_t net_seed, std::uint64_t env_seed);
  PpoLearner(const PpoLearner&) = delete;
  PpoLearner& operator=(const PpoLearner&) = delete;
  PpoLearner(PpoLearner&&) = default;

  /// Collects `steps` transitions, continuing the current episode, then
  /// estimates advantages.
  RolloutBatch collect(std::size_t steps);
  /// A fresh permutation of [0, n) split into minibatches.
  std::vector<std::vector<std::size_t>> minibatches(std::size_t n);
  LossTerms update(const RolloutBatch& rollout, std::span<const std::size_t> index, const LossHook& hook = {});
  /// Linear decay of the learning rate by fraction of the budget consumed.
  void set_progress(double fraction_done);

  const policy::PolicyNetwork& net() const { return net_; }
  policy::PolicyNetwork& net() { return net_; }
  std::int64_t env_steps() const { return env_steps_; }

 private:
  PpoOptions options_;
  policy::PolicyNetwork net_;
  num::Adam optimizer_;
  std::unique_ptr<env::Environment> env_;
  std::vector<double> obs_;
  Rng act_rng_;
  Rng shuffle_rng_;
  std::int64_t env_steps_ = 0;
};

struct RewardLogEntry {
  std::int64_t step = 0;
  double mean_return = 0.0;
  double max_return = 0.0;
  LossTerms losses;  // averaged over updates since the previous entry
};

struct TrainResult {
  policy::PolicyNetwork net;
  std::vector<RewardLogEntry> log;
};

/// Standard DQN or PPO on one environment. `net_seed` overrides the network
/// and acting streams (defaults to `seed`); environment and evaluation
/// streams always derive from `seed`.
TrainResult train_independent(const TrainOptions& options, std::uint64_t seed,
                              std::optional<std::uint64_t> net_seed = std::nullopt);

/// Evaluation checkpoints: multiples of eval_interval plus the final step.
bool is_eval_step(std::int64_t step, std::int64_t previous_step, const TrainOptions& options);

/// Running mean of LossTerms.
class LossAverager {
 public:
  void add(const LossTerms& t);
  LossTerms take();

 private:
  LossTerms sum_;
  std::size_t n_ = 0;
};

}  // namespace opd::rl
