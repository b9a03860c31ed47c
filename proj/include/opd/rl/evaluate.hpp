#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "opd/envs/environment.hpp"
#include "opd/policy/network.hpp"

namespace opd::rl {

struct EvalResult {
  double mean_return = 0.0;
  double max_return = 0.0;
  std::vector<double> returns;
};

using ActionFn = std::function<std::size_t(const std::vector<double>& observation)>;

/// Runs `episodes` episodes on a copy of `env` reseeded with `seed`.
EvalResult evaluate_policy(const ActionFn& act, const env::Environment& env, std::size_t episodes,
                           std::uint64_t seed);

/// Argmax acting on the decision head (Q-values, or actor probabilities for
/// PPO). No exploration and no parameter updates. ParameterError if episodes == 0.
EvalResult evaluate(const policy::PolicyNetwork& net, const env::Environment& env, std::size_t episodes,
                    std::uint64_t seed);

/// Decision row of a single observation, without recording history.
std::vector<double> decide(const policy::PolicyNetwork& net, const std::vector<double>& observation);

}  // namespace opd::rl
