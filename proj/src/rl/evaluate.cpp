#include "opd/rl/evaluate.hpp"

#include <algorithm>
#include <limits>

#include "opd/errors.hpp"
#include "opd/rl/dqn.hpp"

namespace opd::rl {

std::vector<double> decide(const policy::PolicyNetwork& net, const std::vector<double>& observation) {
  num::NoGradGuard guard;
  const auto out = net.forward(num::Tensor::matrix(1, observation.size(), observation));
  return {out.decision.values().begin(), out.decision.values().end()};
}

EvalResult evaluate_policy(const ActionFn& act, const env::Environment& env, std::size_t episodes,
                           std::uint64_t seed) {
  if (episodes == 0) throw ParameterError("evaluation needs at least one episode");
  auto e = env.clone();
  EvalResult res;
  res.returns.reserve(episodes);
  auto state = e->reset(seed);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    if (ep > 0) state = e->reset();
    std::vector<double> obs = std::move(state.observation);
    double total = 0.0;
    for (;;) {
      auto step = e->step(act(obs));
      total += step.reward;
      if (step.done) break;
      obs = std::move(step.next_observation);
    }
    res.returns.push_back(total);
  }
  double sum = 0.0;
  res.max_return = -std::numeric_limits<double>::infinity();
  for (double r : res.returns) {
    sum += r;
    res.max_return = std::max(res.max_return, r);
  }
  res.mean_return = sum / static_cast<double>(episodes);
  return res;
}

EvalResult evaluate(const policy::PolicyNetwork& net, const env::Environment& env, std::size_t episodes,
                    std::uint64_t seed) {
  // Softmax is monotone, so the argmax of the logits is the distribution mode.
  return evaluate_policy([&](const std::vector<double>& obs) { return argmax(decide(net, obs)); }, env, episodes,
                         seed);
}

}  // namespace opd::rl
