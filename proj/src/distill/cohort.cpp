#include "opd/distill/cohort.hpp"

#include <algorithm>
#include <memory>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"
#include "opd/rl/evaluate.hpp"

namespace opd::distill {

using num::Tensor;
using policy::PolicyNetwork;

std::uint64_t member_seed(std::uint64_t seed, std::size_t index) {
  return index == 0 ? seed : derive_seed(seed, 0xC0407 + index);
}

void validate_cohort(const std::vector<const PolicyNetwork*>& members) {
  if (members.size() < 2) throw ConfigError("a cohort needs at least two members");
  for (const auto* m : members) {
    if (!(m->architecture() == members.front()->architecture())) {
      throw ConfigError("cohort members must share one architecture: " + policy::describe(m->architecture()) +
                        " vs " + policy::describe(members.front()->architecture()));
    }
  }
}

rl::LossHook make_distillation_hook(const std::vector<const PolicyNetwork*>& members, std::size_t student,
                                    const CohortOptions& options) {
  const auto algorithm = members.at(student)->architecture().algorithm;
  return [members, student, options, algorithm](const policy::ForwardResult& out, const Tensor& states,
                                                const Tensor& rl_loss, rl::LossTerms& terms) {
    const auto& c = options.coefficients;
    Tensor dec, feat;
    if (c.decision != 0.0 || c.feature != 0.0) {
      std::vector<policy::ForwardResult> peers;
      {
        num::NoGradGuard guard;
        for (std::size_t j = 0; j < members.size(); ++j)
          if (j != student) peers.push_back(members[j]->forward(states));
      }
      const auto target = build_targets(out, peers, options.attention);
      if (c.decision != 0.0) dec = decision_loss(out, target, algorithm, options.temperature);
      if (c.feature != 0.0) feat = feature_loss(out.feature, target.feature);
    }
    LossBreakdown breakdown;
    Tensor total = total_loss(rl_loss, dec, feat, c, &breakdown);
    terms.rl = breakdown.rl;
    terms.decision = breakdown.decision;
    terms.feature = breakdown.feature;
    return total;
  };
}

double mean_pairwise_kl(const std::vector<const PolicyNetwork*>& members, std::size_t member, const Tensor& states,
                        double temperature) {
  num::NoGradGuard guard;
  std::vector<Tensor> decisions;
  for (const auto* m : members) decisions.push_back(m->forward(states).decision);
  const std::size_t n = states.rows(), p = decisions.front().cols();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (j == member) continue;
    for (std::size_t r = 0; r < n; ++r) {
      const auto pi = num::softmax_temperature(decisions[member].values().subspan(r * p, p), temperature);
      const auto pj = num::softmax_temperature(decisions[j].values().subspan(r * p, p), temperature);
      total += kl_divergence(pi, pj);
    }
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count * n);
}

namespace {

void check_options(const CohortOptions& o) {
  if (o.members < 2) throw ConfigError("cohort size must be at least 2");
  if (!(o.temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
  if (o.train.budget < 0) throw ConfigError("training budget must be nonnegative");
  if (o.train.eval_episodes == 0) throw ConfigError("evaluation needs at least one episode");
}

Tensor probe_rows(std::span<const std::vector<double>> states, std::size_t limit) {
  return policy::stack_observations(states.first(std::min(limit, states.size())));
}

CohortResult train_dqn_cohort(const CohortOptions& o, std::uint64_t seed) {
  const auto& t = o.train;
  auto env = env::make_environment(t.env_id, t.env);
  const auto arch = rl::architecture_for(t, *env);
  std::vector<rl::DqnLearner> learners;
  learners.reserve(o.members);
  for (std::size_t i = 0; i < o.members; ++i) learners.emplace_back(arch, t.dqn, member_seed(seed, i));
  std::vector<const PolicyNetwork*> nets;
  for (auto& l : learners) nets.push_back(&l.online());
  validate_cohort(nets);

  std::vector<rl::LossHook> hooks;
  for (std::size_t i = 0; i < o.members; ++i) hooks.push_back(make_distillation_hook(nets, i, o));

  rl::ReplayBuffer buffer(t.dqn.buffer_capacity, derive_seed(seed, rl::kReplayStream));
  Rng act_rng(derive_seed(seed, rl::kActStream));
  const std::uint64_t eval_seed = derive_seed(seed, rl::kEvalStream);
  std::vector<rl::LossAverager> losses(o.members);
  std::vector<std::vector<double>> probe;

  CohortResult result;
  std::vector<double> obs = env->reset(derive_seed(seed, rl::kEnvStream)).observation;
  const std::size_t ready = std::max(t.dqn.warmup, t.dqn.batch_size);
  for (std::int64_t step = 1; step <= t.budget; ++step) {
    const std::size_t actor = static_cast<std::size_t>((step - 1) % static_cast<std::int64_t>(o.members));
    const std::size_t a = learners[actor].act(obs, step, act_rng);
    auto sr = env->step(a);
    buffer.push({obs, a, sr.reward, sr.next_observation, sr.done && !sr.truncated});
    obs = sr.done ? env->reset().observation : std::move(sr.next_observation);

    if (buffer.size() >= ready) {
      const auto batch = buffer.sample(t.dqn.batch_size);
      const bool distill = step > o.distill_warmup;
      for (std::size_t i = 0; i < o.members; ++i) losses[i].add(learners[i].update(batch, distill ? hooks[i] : rl::LossHook{}));
      probe.clear();
      for (const auto* tr : batch) probe.push_back(tr->s);
    }
    for (auto& l : learners) l.end_step(step);

    if (rl::is_eval_step(step, step - 1, t)) {
      for (std::size_t i = 0; i < o.members; ++i) {
        const auto ev = rl::evaluate(learners[i].online(), *env, t.eval_episodes, eval_seed);
        const auto lt = losses[i].take();
        const double kl = probe.empty() ? 0.0 : mean_pairwise_kl(nets, i, probe_rows(probe, 256), o.temperature);
        result.log.push_back({step, i, ev.mean_return, ev.max_return, lt.rl, lt.decision, lt.feature, kl});
      }
    }
  }
  for (auto& l : learners) {
    l.online().set_training_step(t.budget);
    result.members.push_back(l.online());
  }
  return result;
}

CohortResult train_ppo_cohort(const CohortOptions& o, std::uint64_t seed) {
  const auto& t = o.train;
  auto env = env::make_environment(t.env_id, t.env);
  const auto arch = rl::architecture_for(t, *env);
  const std::uint64_t env_seed = derive_seed(seed, rl::kEnvStream);
  std::vector<std::unique_ptr<rl::PpoLearner>> learners;
  for (std::size_t i = 0; i < o.members; ++i) {
    learners.push_back(std::make_unique<rl::PpoLearner>(arch, t.ppo, *env, member_seed(seed, i), env_seed));
  }
  std::vector<const PolicyNetwork*> nets;
  for (auto& l : learners) nets.push_back(&l->net());
  validate_cohort(nets);

  std::vector<rl::LossHook> hooks;
  for (std::size_t i = 0; i < o.members; ++i) hooks.push_back(make_distillation_hook(nets, i, o));

  const std::uint64_t eval_seed = derive_seed(seed, rl::kEvalStream);
  std::vector<rl::LossAverager> losses(o.members);
  CohortResult result;
  std::vector<rl::RolloutBatch> rollouts(o.members);
  std::int64_t steps = 0;
  while (steps < t.budget) {
    const auto n = static_cast<std::size_t>(
        std::min<std::int64_t>(static_cast<std::int64_t>(t.ppo.rollout), t.budget - steps));
    for (std::size_t i = 0; i < o.members; ++i) {
      learners[i]->set_progress(static_cast<double>(steps) / static_cast<double>(t.budget));
      rollouts[i] = learners[i]->collect(n);
    }
    const bool distill = steps + static_cast<std::int64_t>(n) > o.distill_warmup;
    for (std::size_t epoch = 0; epoch < t.ppo.epochs; ++epoch) {
      std::vector<std::vector<std::vector<std::size_t>>> plans;
      for (auto& l : learners) plans.push_back(l->minibatches(n));
      for (std::size_t k = 0; k < plans.front().size(); ++k)
        for (std::size_t i = 0; i < o.members; ++i)
          losses[i].add(learners[i]->update(rollouts[i], plans[i][k], distill ? hooks[i] : rl::LossHook{}));
    }
    const std::int64_t previous = steps;
    steps += static_cast<std::int64_t>(n);
    if (rl::is_eval_step(steps, previous, t)) {
      for (std::size_t i = 0; i < o.members; ++i) {
        const auto ev = rl::evaluate(learners[i]->net(), *env, t.eval_episodes, eval_seed);
        const auto lt = losses[i].take();
        const double kl = mean_pairwise_kl(nets, i, probe_rows(rollouts[i].states, 256), o.temperature);
        result.log.push_back({steps, i, ev.mean_return, ev.max_return, lt.rl, lt.decision, lt.feature, kl});
      }
    }
  }
  for (auto& l : learners) {
    l->net().set_training_step(steps);
    result.members.push_back(l->net());
  }
  return result;
}

}  // namespace

CohortResult train_cohort(const CohortOptions& options, std::uint64_t seed) {
  check_options(options);
  if (options.train.budget == 0) {
    auto env = env::make_environment(options.train.env_id, options.train.env);
    const auto arch = rl::architecture_for(options.train, *env);
    CohortResult r;
    for (std::size_t i = 0; i < options.members; ++i) r.members.push_back(PolicyNetwork::init(arch, member_seed(seed, i)));
    return r;
  }
  return options.train.algorithm == policy::Algorithm::kDqn ? train_dqn_cohort(options, seed)
                                                            : train_ppo_cohort(options, seed);
}

}  // namespace opd::distill
