#pragma once

#include <cstddef>
#include <vector>

namespace opd::env {

/// Deterministic finite MDP: each (state, action) has exactly one successor.
struct TabularMDP {
  struct Successor {
    std::size_t next = 0;
    double reward = 0.0;
    bool done = false;
  };

  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<Successor> table;  // indexed state * actions + action
  double gamma = 0.9;

  const Successor& at(std::size_t s, std::size_t a) const { return table[s * actions + a]; }
  /// Throws ParameterError when the table is incomplete or gamma is outside [0, 1].
  void validate() const;
};

struct QTable {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<double> q;

  double at(std::size_t s, std::size_t a) const { return q[s * actions + a]; }
  /// Argmax per state; lowest index wins ties.
  std::vector<std::size_t> greedy_policy() const;
};

/// The chain environment as a tabular model. The terminal state self-loops
/// with zero reward and done set.
TabularMDP chain_mdp(std::size_t length, double gamma);

/// Iterates the Bellman optimality operator until the sup-norm residual is
/// below `tolerance`.
QTable value_iteration(const TabularMDP& mdp, double tolerance);

/// sup over (s, a) of |r + gamma * (1 - done) * max_a' Q(s', a') - Q(s, a)|.
double bellman_residual(const TabularMDP& mdp, const QTable& q);

}  // namespace opd::env
