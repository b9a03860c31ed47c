#include "opd/rl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"
#include "opd/rl/evaluate.hpp"

namespace opd::rl {

using num::Tensor;
using policy::PolicyNetwork;

policy::Architecture architecture_for(const TrainOptions& options, const env::Environment& env) {
  policy::Architecture arch;
  arch.algorithm = options.algorithm;
  arch.input_dim = env.observation_dim();
  arch.hidden = options.hidden;
  arch.action_count = env.action_count();
  policy::validate(arch);
  return arch;
}

bool is_eval_step(std::int64_t step, std::int64_t previous_step, const TrainOptions& options) {
  if (step >= options.budget) return true;
  if (options.eval_interval <= 0) return false;
  return step / options.eval_interval > previous_step / options.eval_interval;
}

void LossAverager::add(const LossTerms& t) {
  sum_.rl += t.rl;
  sum_.decision += t.decision;
  sum_.feature += t.feature;
  sum_.total += t.total;
  ++n_;
}

LossTerms LossAverager::take() {
  LossTerms out;
  if (n_ > 0) {
    const double n = static_cast<double>(n_);
    out = {sum_.rl / n, sum_.decision / n, sum_.feature / n, sum_.total / n};
  }
  sum_ = {};
  n_ = 0;
  return out;
}

// ---- DQN ----

DqnLearner::DqnLearner(const policy::Architecture& arch, const DqnOptions& options, std::uint64_t seed)
    : options_(options),
      online_(PolicyNetwork::init(arch, seed)),
      target_(online_),
      optimizer_(online_.parameters(), {options.learning_rate, 0.9, 0.999, 1e-8, options.max_grad_norm}),
      schedule_(options.target_sync) {
  if (arch.algorithm != policy::Algorithm::kDqn) throw ConfigError("DQN learner needs a Q-network architecture");
  if (options.batch_size == 0) throw ParameterError("DQN batch size must be positive");
}

std::size_t DqnLearner::act(const std::vector<double>& observation, std::int64_t step, Rng& rng) const {
  const double eps = linear_epsilon(step, options_.eps_start, options_.eps_end, options_.eps_horizon);
  return epsilon_greedy(decide(online_, observation), eps, rng);
}

LossTerms DqnLearner::update(TransitionBatch batch, const LossHook& hook) {
  const auto targets = dqn_targets(target_, batch, options_.gamma);
  std::vector<const std::vector<double>*> rows;
  rows.reserve(batch.size());
  for (const auto* t : batch) rows.push_back(&t->s);
  const Tensor states = policy::stack_observations(std::span<const std::vector<double>* const>(rows));
  const auto student = online_.forward(states);
  const Tensor rl_loss = dqn_loss_from(student.decision, batch, targets);

  LossTerms terms;
  terms.rl = rl_loss.item();
  Tensor loss = rl_loss;
  if (hook) {
    loss = hook(student, states, rl_loss, terms);
  }
  terms.total = loss.item();
  optimizer_.zero_grad();
  num::backward(loss);
  optimizer_.step();
  return terms;
}

void DqnLearner::end_step(std::int64_t step) { schedule_.maybe_sync(step, online_, target_); }

// ---- PPO ----

PpoLearner::PpoLearner(const policy::Architecture& arch, const PpoOptions& options, const env::Environment& env,
                       std::uint64_t net_seed, std::uint64_t env_seed)
    : options_(options),
      net_(PolicyNetwork::init(arch, net_seed)),
      optimizer_(net_.parameters(), {options.learning_rate, 0.9, 0.999, 1e-8, options.max_grad_norm}),
      env_(env.clone()),
      act_rng_(derive_seed(net_seed, kActStream)),
      shuffle_rng_(derive_seed(net_seed, kShuffleStream)) {
  if (arch.algorithm != policy::Algorithm::kPpo) throw ConfigError("PPO learner needs an actor-critic architecture");
  if (options.rollout == 0 || options.minibatch == 0 || options.epochs == 0) {
    throw ParameterError("PPO rollout, minibatch and epochs must be positive");
  }
  obs_ = env_->reset(env_seed).observation;
}

RolloutBatch PpoLearner::collect(std::size_t steps) {
  RolloutBatch r;
  r.states.reserve(steps);
  std::vector<std::size_t> pending;  // steps awaiting V(s_{t+1})
  for (std::size_t t = 0; t < steps; ++t) {
    double value = 0.0;
    std::vector<double> probs;
    {
      num::NoGradGuard guard;
      const auto out = net_.forward(Tensor::matrix(1, obs_.size(), obs_));
      value = out.value[0];
      probs = num::softmax_temperature(out.decision.values(), 1.0);
    }
    for (auto k : pending) r.next_values[k] = value;
    pending.clear();

    const double u = act_rng_.uniform();
    std::size_t action = probs.size() - 1;
    double acc = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      acc += probs[a];
      if (u < acc) {
        action = a;
        break;
      }
    }
    auto step = env_->step(action);
    ++env_steps_;

    r.states.push_back(obs_);
    r.actions.push_back(action);
    r.rewards.push_back(step.reward);
    r.terminated.push_back(step.done && !step.truncated);
    r.episode_end.push_back(step.done);
    r.old_log_probs.push_back(std::log(std::max(probs[action], 1e-300)));
    r.values.push_back(value);
    r.next_values.push_back(0.0);

    if (step.done) {
      if (step.truncated) {
        num::NoGradGuard guard;
        const auto& o = step.next_observation;
        r.next_values.back() = net_.forward(Tensor::matrix(1, o.size(), o)).value[0];
      }
      obs_ = env_->reset().observation;
    } else {
      obs_ = std::move(step.next_observation);
      pending.push_back(t);
    }
  }
  if (!pending.empty()) {
    num::NoGradGuard guard;
    const double v = net_.forward(Tensor::matrix(1, obs_.size(), obs_)).value[0];
    for (auto k : pending) r.next_values[k] = v;
  }
  compute_advantages(r, options_.gamma, options_.lambda, options_.normalize_advantages);
  return r;
}

std::vector<std::vector<std::size_t>> PpoLearner::minibatches(std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[shuffle_rng_.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += options_.minibatch) {
    const std::size_t end = std::min(n, start + options_.minibatch);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

LossTerms PpoLearner::update(const RolloutBatch& rollout, std::span<const std::size_t> index, const LossHook& hook) {
  std::vector<const std::vector<double>*> rows;
  std::vector<std::size_t> actions;
  std::vector<double> old_lp, adv, ret;
  for (auto i : index) {
    rows.push_back(&rollout.states[i]);
    actions.push_back(rollout.actions[i]);
    old_lp.push_back(rollout.old_log_probs[i]);
    adv.push_back(rollout.advantages[i]);
    ret.push_back(rollout.returns[i]);
  }
  const Tensor states = policy::stack_observations(std::span<const std::vector<double>* const>(rows));
  const auto student = net_.forward(states);
  const Tensor new_lp = num::pick(num::log_softmax(student.decision), actions);
  const Tensor actor = ppo_actor_loss(new_lp, old_lp, adv, options_.clip);
  const Tensor critic = ppo_critic_loss(student.value, ret);
  const Tensor rl_loss = num::add(actor, num::scale(critic, options_.value_coef));

  LossTerms terms;
  terms.rl = rl_loss.item();
  Tensor loss = rl_loss;
  if (hook) loss = hook(student, states, rl_loss, terms);
  terms.total = loss.item();
  optimizer_.zero_grad();
  num::backward(loss);
  optimizer_.step();
  return terms;
}

void PpoLearner::set_progress(double fraction_done) {
  if (!options_.anneal_lr) return;
  const double f = std::clamp(1.0 - fraction_done, 0.0, 1.0);
  optimizer_.set_learning_rate(std::max(options_.learning_rate * f, 1e-12));
}

// ---- independent training ----

namespace {

TrainResult train_dqn(const TrainOptions& o, std::uint64_t seed, std::uint64_t net_seed) {
  auto env = env::make_environment(o.env_id, o.env);
  const auto arch = architecture_for(o, *env);
  DqnLearner learner(arch, o.dqn, net_seed);
  ReplayBuffer buffer(o.dqn.buffer_capacity, derive_seed(seed, kReplayStream));
  Rng act_rng(derive_seed(net_seed, kActStream));
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);

  TrainResult result;
  LossAverager losses;
  std::vector<double> obs = env->reset(derive_seed(seed, kEnvStream)).observation;
  const std::size_t ready = std::max(o.dqn.warmup, o.dqn.batch_size);
  for (std::int64_t step = 1; step <= o.budget; ++step) {
    const std::size_t a = learner.act(obs, step, act_rng);
    auto sr = env->step(a);
    buffer.push({obs, a, sr.reward, sr.next_observation, sr.done && !sr.truncated});
    obs = sr.done ? env->reset().observation : std::move(sr.next_observation);

    if (buffer.size() >= ready) losses.add(learner.update(buffer.sample(o.dqn.batch_size)));
    learner.end_step(step);

    if (is_eval_step(step, step - 1, o)) {
      const auto ev = evaluate(learner.online(), *env, o.eval_episodes, eval_seed);
      result.log.push_back({step, ev.mean_return, ev.max_return, losses.take()});
    }
  }
  learner.online().set_training_step(o.budget);
  result.net = learner.online();
  return result;
}

TrainResult train_ppo(const TrainOptions& o, std::uint64_t seed, std::uint64_t net_seed) {
  auto env = env::make_environment(o.env_id, o.env);
  const auto arch = architecture_for(o, *env);
  PpoLearner learner(arch, o.ppo, *env, net_seed, derive_seed(seed, kEnvStream));
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);

  TrainResult result;
  LossAverager losses;
  std::int64_t steps = 0;
  while (steps < o.budget) {
    const auto n = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(o.ppo.rollout), o.budget - steps));
    learner.set_progress(static_cast<double>(steps) / static_cast<double>(o.budget));
    const auto rollout = learner.collect(n);
    for (std::size_t epoch = 0; epoch < o.ppo.epochs; ++epoch)
      for (const auto& mb : learner.minibatches(n)) losses.add(learner.update(rollout, mb));
    const std::int64_t previous = steps;
    steps += static_cast<std::int64_t>(n);
    if (is_eval_step(steps, previous, o)) {
      const auto ev = evaluate(learner.net(), *env, o.eval_episodes, eval_seed);
      result.log.push_back({steps, ev.mean_return, ev.max_return, losses.take()});
    }
  }
  learner.net().set_training_step(steps);
  result.net = learner.net();
  return result;
}

}  // namespace

TrainResult train_independent(const TrainOptions& options, std::uint64_t seed, std::optional<std::uint64_t> net_seed) {
  if (options.budget < 0) throw ParameterError("training budget must be nonnegative");
  if (options.eval_episodes == 0) throw ParameterError("evaluation needs at least one episode");
  const std::uint64_t ns = net_seed.value_or(seed);
  if (options.budget == 0) {
    auto env = env::make_environment(options.env_id, options.env);
    return {PolicyNetwork::init(architecture_for(options, *env), ns), {}};
  }
  return options.algorithm == policy::Algorithm::kDqn ? train_dqn(options, seed, ns) : train_ppo(options, seed, ns);
}

}  // namespace opd::rl
