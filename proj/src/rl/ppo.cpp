#include "opd/rl/ppo.hpp"

#include <cmath>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"

namespace opd::rl {

using num::Tensor;

void RolloutBatch::validate() const {
  const std::size_t n = rewards.size();
  if (states.size() != n || actions.size() != n || terminated.size() != n || episode_end.size() != n ||
      old_log_probs.size() != n || values.size() != n || next_values.size() != n) {
    throw UsageError("rollout arrays have inconsistent lengths");
  }
}

AdvantageEstimate generalized_advantages(const RolloutBatch& r, double gamma, double lambda) {
  if (r.size() == 0) throw UsageError("advantage estimation on an empty rollout");
  if (!(gamma > 0.0 && gamma <= 1.0) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw ParameterError("gamma and lambda must lie in (0, 1]");
  }
  if (r.values.size() != r.size() || r.next_values.size() != r.size() || r.terminated.size() != r.size() ||
      r.episode_end.size() != r.size()) {
    throw UsageError("rollout arrays have inconsistent lengths");
  }
  const std::size_t n = r.size();
  AdvantageEstimate est;
  est.advantages.assign(n, 0.0);
  est.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double bootstrap = r.terminated[k] ? 0.0 : gamma * r.next_values[k];
    const double delta = r.rewards[k] + bootstrap - r.values[k];
    const double carry = r.episode_end[k] ? 0.0 : gamma * lambda * running;
    running = delta + carry;
    if (!std::isfinite(running)) throw NumericError("gae", "advantage at step " + std::to_string(k));
    est.advantages[k] = running;
    est.returns[k] = running + r.values[k];
  }
  return est;
}

std::vector<double> normalize_advantages(std::span<const double> a) {
  if (a.empty()) return {};
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  var /= static_cast<double>(a.size());
  std::vector<double> out(a.size());
  const double scale = var < 1e-8 ? 1.0 : 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mean) * scale;
  return out;
}

void compute_advantages(RolloutBatch& rollout, double gamma, double lambda, bool normalize) {
  auto est = generalized_advantages(rollout, gamma, lambda);
  rollout.returns = std::move(est.returns);
  rollout.advantages = normalize ? normalize_advantages(est.advantages) : std::move(est.advantages);
}

Tensor ppo_actor_loss(const Tensor& new_log_probs, std::span<const double> old_log_probs,
                      std::span<const double> advantages, double clip) {
  if (!(clip > 0.0)) throw ParameterError("clip range must be positive");
  const std::size_t n = new_log_probs.size();
  if (old_log_probs.size() != n || advantages.size() != n || n == 0) {
    throw UsageError("ppo actor loss: inconsistent or empty inputs");
  }
  const Tensor old_lp = Tensor::from(new_log_probs.shape(), {old_log_probs.begin(), old_log_probs.end()});
  const Tensor adv = Tensor::from(new_log_probs.shape(), {advantages.begin(), advantages.end()});
  const Tensor ratio = num::exp(num::sub(new_log_probs, old_lp));
  for (double v : ratio.values())
    if (!std::isfinite(v)) throw NumericError("ppo_ratio", "probability ratio overflowed");
  const Tensor unclipped = num::mul(ratio, adv);
  const Tensor clipped = num::mul(num::clamp(ratio, 1.0 - clip, 1.0 + clip), adv);
  return num::scale(num::mean(num::minimum(unclipped, clipped)), -1.0);
}

Tensor ppo_critic_loss(const Tensor& values, std::span<const double> returns) {
  if (values.size() != returns.size()) throw UsageError("ppo critic loss: values and returns differ in length");
  if (returns.empty()) throw UsageError("ppo critic loss on an empty batch");
  const Tensor target = Tensor::from(values.shape(), {returns.begin(), returns.end()});
  return num::mse(values, target);
}

}  // namespace opd::rl
