#include "opd/envs/tabular.hpp"

#include <algorithm>
#include <cmath>

#include "opd/errors.hpp"

namespace opd::env {

namespace {

double state_value(const QTable& q, std::size_t s) {
  double best = q.at(s, 0);
  for (std::size_t a = 1; a < q.actions; ++a) best = std::max(best, q.at(s, a));
  return best;
}

double backup(const TabularMDP& mdp, const QTable& q, std::size_t s, std::size_t a) {
  const auto& succ = mdp.at(s, a);
  return succ.reward + (succ.done ? 0.0 : mdp.gamma * state_value(q, succ.next));
}

}  // namespace

void TabularMDP::validate() const {
  if (states == 0 || actions == 0) throw ParameterError("tabular MDP needs at least one state and action");
  if (table.size() != states * actions) throw ParameterError("tabular MDP needs one successor per (state, action)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("discount must lie in [0, 1]");
  for (const auto& s : table)
    if (s.next >= states || !std::isfinite(s.reward)) throw ParameterError("tabular MDP successor out of range");
}

std::vector<std::size_t> QTable::greedy_policy() const {
  std::vector<std::size_t> pi(states, 0);
  for (std::size_t s = 0; s < states; ++s)
    for (std::size_t a = 1; a < actions; ++a)
      if (at(s, a) > at(s, pi[s])) pi[s] = a;
  return pi;
}

TabularMDP chain_mdp(std::size_t length, double gamma) {
  if (length < 2) throw ParameterError("chain needs at least 2 states");
  TabularMDP mdp;
  mdp.states = length;
  mdp.actions = 2;
  mdp.gamma = gamma;
  mdp.table.resize(length * 2);
  const std::size_t last = length - 1;
  for (std::size_t s = 0; s < length; ++s) {
    if (s == last) {
      mdp.table[s * 2 + 0] = {s, 0.0, true};
      mdp.table[s * 2 + 1] = {s, 0.0, true};
      continue;
    }
    const std::size_t left = s == 0 ? 0 : s - 1;
    mdp.table[s * 2 + 0] = {left, 0.0, false};
    const std::size_t right = s + 1;
    mdp.table[s * 2 + 1] = {right, right == last ? 1.0 : 0.0, right == last};
  }
  return mdp;
}

QTable value_iteration(const TabularMDP& mdp, double tolerance) {
  if (!(tolerance > 0.0)) throw ParameterError("value iteration tolerance must be positive");
  mdp.validate();
  QTable q{mdp.states, mdp.actions, std::vector<double>(mdp.states * mdp.actions, 0.0)};
  // gamma == 1 on a model with non-terminating cycles may not converge.
  constexpr std::size_t kMaxSweeps = 1'000'000;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    QTable next = q;
    double delta = 0.0;
    for (std::size_t s = 0; s < mdp.states; ++s)
      for (std::size_t a = 0; a < mdp.actions; ++a) {
        next.q[s * mdp.actions + a] = backup(mdp, q, s, a);
        delta = std::max(delta, std::abs(next.q[s * mdp.actions + a] - q.at(s, a)));
      }
    q = std::move(next);
    if (delta < tolerance && bellman_residual(mdp, q) < tolerance) return q;
  }
  throw ParameterError("value iteration did not converge");
}

double bellman_residual(const TabularMDP& mdp, const QTable& q) {
  double r = 0.0;
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t a = 0; a < mdp.actions; ++a) r = std::max(r, std::abs(backup(mdp, q, s, a) - q.at(s, a)));
  return r;
}

}  // namespace opd::env
