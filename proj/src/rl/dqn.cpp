#include "opd/rl/dqn.hpp"

#include <algorithm>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"

namespace opd::rl {

using num::Tensor;

namespace {

void check_batch(TransitionBatch batch) {
  if (batch.empty()) throw UsageError("dqn loss on an empty batch");
}

Tensor stack(TransitionBatch batch, bool next) {
  std::vector<const std::vector<double>*> rows;
  rows.reserve(batch.size());
  for (const auto* t : batch) rows.push_back(next ? &t->s_next : &t->s);
  return policy::stack_observations(std::span<const std::vector<double>* const>(rows));
}

}  // namespace

std::vector<double> dqn_targets(const policy::PolicyNetwork& target_net, TransitionBatch batch, double gamma) {
  check_batch(batch);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("discount must lie in (0, 1]");
  num::NoGradGuard guard;
  const Tensor q_next = target_net.forward(stack(batch, true)).decision;
  const std::size_t p = q_next.cols();
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = q_next.values().subspan(i * p, p);
    const double best = *std::max_element(row.begin(), row.end());
    y[i] = batch[i]->r + (batch[i]->done ? 0.0 : gamma * best);
  }
  return y;
}

Tensor dqn_loss_from(const Tensor& q_online, TransitionBatch batch, std::span<const double> targets) {
  check_batch(batch);
  if (q_online.rows() != batch.size() || targets.size() != batch.size()) {
    throw UsageError("dqn loss: batch, prediction and target sizes differ");
  }
  std::vector<std::size_t> actions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) actions[i] = batch[i]->a;
  const Tensor q_sa = num::pick(q_online, actions);
  const Tensor y = Tensor::vector(std::vector<double>(targets.begin(), targets.end()));
  return num::mse(q_sa, y);
}

Tensor dqn_loss(const policy::PolicyNetwork& online, const policy::PolicyNetwork& target, TransitionBatch batch,
                double gamma) {
  const auto y = dqn_targets(target, batch, gamma);
  return dqn_loss_from(online.forward(stack(batch, false)).decision, batch, y);
}

void sync_target(const policy::PolicyNetwork& online, policy::PolicyNetwork& target) {
  target.copy_parameters_from(online);
}

TargetSchedule::TargetSchedule(std::int64_t every) : every_(every) {
  if (every <= 0) throw ParameterError("target sync interval must be positive");
}

bool TargetSchedule::maybe_sync(std::int64_t step, const policy::PolicyNetwork& online,
                                policy::PolicyNetwork& target) const {
  if (step % every_ != 0) return false;
  sync_target(online, target);
  return true;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t epsilon_greedy(std::span<const double> q_values, double eps, Rng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ParameterError("epsilon must lie in [0, 1]");
  if (q_values.empty()) throw UsageError("epsilon_greedy over zero actions");
  if (rng.uniform() < eps) return static_cast<std::size_t>(rng.below(q_values.size()));
  return argmax(q_values);
}

double linear_epsilon(std::int64_t step, double start, double end, std::int64_t horizon) {
  if (horizon <= 0 || step >= horizon) return end;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(horizon);
  return start + (end - start) * frac;
}

}  // namespace opd::rl
