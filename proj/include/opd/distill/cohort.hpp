#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opd/distill/attention.hpp"
#include "opd/distill/losses.hpp"
#include "opd/policy/network.hpp"
#include "opd/rl/train.hpp"

namespace opd::distill {

struct CohortOptions {
  rl::TrainOptions train;
  std::size_t members = 3;
  LossCoefficients coefficients;
  double temperature = 1.0;
  AttentionMode attention = AttentionMode::kDecisionAttention;
  std::int64_t distill_warmup = 0;  // env steps before distillation terms switch on
};

struct MemberLogEntry {
  std::int64_t step = 0;
  std::size_t member = 0;  // 0-based
  double eval_return_mean = 0.0;
  double eval_return_max = 0.0;
  double loss_rl = 0.0;
  double loss_decision = 0.0;
  double loss_feature = 0.0;
  double mean_pairwise_kl = 0.0;
};

struct CohortResult {
  std::vector<policy::PolicyNetwork> members;
  std::vector<MemberLogEntry> log;
};

/// Network seed of cohort member `index`; member 0 uses the run seed itself.
std::uint64_t member_seed(std::uint64_t seed, std::size_t index);

/// ConfigError unless every network shares one architecture.
void validate_cohort(const std::vector<const policy::PolicyNetwork*>& members);

/// Loss hook that distills `student` from every other cohort member on the
/// student's batch states. Peers are read at call time and never receive
/// gradient.
rl::LossHook make_distillation_hook(const std::vector<const policy::PolicyNetwork*>& members, std::size_t student,
                                    const CohortOptions& options);

/// Mean over peers j of KL(p_member || p_j), p = softmax(decision / T), on `states`.
double mean_pairwise_kl(const std::vector<const policy::PolicyNetwork*>& members, std::size_t member,
                        const num::Tensor& states, double temperature);

/// Trains T peers jointly. DQN members share one environment and replay
/// buffer, act round-robin, and all update on the same sampled minibatch.
/// PPO members collect from their own environment copies with a shared seed
/// schedule. Member updates run sequentially in index order.
CohortResult train_cohort(const CohortOptions& options, std::uint64_t seed);

}  // namespace opd::distill
