#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "opd/numerics/rng.hpp"

namespace opd::env {

struct EnvState {
  std::vector<double> observation;
  std::size_t step_index = 0;
};

struct StepResult {
  std::vector<double> next_observation;
  double reward = 0.0;
  bool done = false;       // episode over, for any reason
  bool truncated = false;  // ended by a step cap rather than a terminal state
};

/// Discrete-action episodic environment. Every instance owns its own
/// generator: `reset(seed)` reseeds, `reset()` continues the stream.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_count() const = 0;

  EnvState reset(std::uint64_t seed);
  EnvState reset();
  /// Throws UsageError for an out-of-range action or a step after done.
  StepResult step(std::size_t action);

  bool done() const { return done_; }
  std::size_t step_index() const { return steps_; }
  const std::vector<double>& observation() const { return observation_; }

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual std::vector<double> do_reset(Rng& rng) = 0;
  virtual StepResult do_step(std::size_t action) = 0;
  /// For subclasses that teleport their state inside a live episode.
  void replace_observation(std::vector<double> observation) { observation_ = std::move(observation); }

 private:
  Rng rng_{0};
  std::vector<double> observation_;
  std::size_t steps_ = 0;
  bool done_ = true;
};

struct EnvOptions {
  std::size_t chain_length = 5;
  std::size_t chain_max_steps = 100;
  std::size_t cartpole_max_steps = 500;
};

/// Known ids: "catch", "cartpole", "chain". Anything else is a ConfigError.
std::unique_ptr<Environment> make_environment(const std::string& env_id, const EnvOptions& options = {});

/// Ball falls one row per step; a bottom-row paddle must meet it.
class Catch final : public Environment {
 public:
  static constexpr std::size_t kRows = 10;
  static constexpr std::size_t kCols = 5;
  enum Action : std::size_t { kLeft = 0, kStay = 1, kRight = 2 };

  std::string id() const override { return "catch"; }
  std::size_t observation_dim() const override { return kRows * kCols; }
  std::size_t action_count() const override { return 3; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Catch>(*this); }

  std::size_t ball_row() const { return ball_row_; }
  std::size_t ball_column() const { return ball_col_; }
  std::size_t paddle_column() const { return paddle_col_; }

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::size_t action) override;

 private:
  std::vector<double> render() const;
  std::size_t ball_row_ = 0, ball_col_ = 0, paddle_col_ = kCols / 2;
};

/// Classic pole balancing with explicit Euler integration.
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXLimit = 2.4;
  static constexpr double kThetaLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;

  explicit CartPole(std::size_t max_steps = 500) : max_steps_(max_steps) {}

  std::string id() const override { return "cartpole"; }
  std::size_t observation_dim() const override { return 4; }
  std::size_t action_count() const override { return 2; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPole>(*this); }

  /// Overwrites the physical state; the episode becomes live.
  void set_state(const std::vector<double>& state);

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::size_t action) override;

 private:
  std::vector<double> state_ = std::vector<double>(4, 0.0);
  std::size_t max_steps_;
  std::size_t t_ = 0;
};

/// N states in a line; reward 1 on entering the rightmost (terminal) state.
class Chain final : public Environment {
 public:
  enum Action : std::size_t { kLeft = 0, kRight = 1 };

  explicit Chain(std::size_t length = 5, std::size_t max_steps = 100);

  std::string id() const override { return "chain"; }
  std::size_t observation_dim() const override { return length_; }
  std::size_t action_count() const override { return 2; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Chain>(*this); }

  std::size_t position() const { return pos_; }
  /// Places the agent on a non-terminal state of a live episode.
  void set_position(std::size_t state);
  std::size_t length() const { return length_; }
  /// One-hot observation of a state index.
  std::vector<double> encode(std::size_t state) const;

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  StepResult do_step(std::size_t action) override;

 private:
  std::size_t length_, max_steps_;
  std::size_t pos_ = 0, t_ = 0;
};

}  // namespace opd::env
