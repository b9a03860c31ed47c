#include "opd/envs/environment.hpp"

#include <cmath>

#include "opd/errors.hpp"

namespace opd::env {

EnvState Environment::reset(std::uint64_t seed) {
  rng_.reseed(seed);
  return reset();
}

EnvState Environment::reset() {
  observation_ = do_reset(rng_);
  steps_ = 0;
  done_ = false;
  return {observation_, 0};
}

StepResult Environment::step(std::size_t action) {
  if (done_) throw UsageError(id() + ": step called after episode end; reset first");
  if (action >= action_count()) {
    throw UsageError(id() + ": action " + std::to_string(action) + " outside [0, " +
                     std::to_string(action_count()) + ")");
  }
  StepResult r = do_step(action);
  ++steps_;
  done_ = r.done;
  observation_ = r.next_observation;
  return r;
}

std::unique_ptr<Environment> make_environment(const std::string& env_id, const EnvOptions& options) {
  if (env_id == "catch") return std::make_unique<Catch>();
  if (env_id == "cartpole") return std::make_unique<CartPole>(options.cartpole_max_steps);
  if (env_id == "chain") return std::make_unique<Chain>(options.chain_length, options.chain_max_steps);
  throw ConfigError("unknown environment id '" + env_id + "' (expected catch, cartpole or chain)");
}

// ---- Catch ----

std::vector<double> Catch::render() const {
  std::vector<double> grid(kRows * kCols, 0.0);
  grid[ball_row_ * kCols + ball_col_] = 1.0;
  grid[(kRows - 1) * kCols + paddle_col_] = 1.0;
  return grid;
}

std::vector<double> Catch::do_reset(Rng& rng) {
  ball_row_ = 0;
  ball_col_ = static_cast<std::size_t>(rng.below(kCols));
  paddle_col_ = kCols / 2;
  return render();
}

StepResult Catch::do_step(std::size_t action) {
  if (action == kLeft && paddle_col_ > 0) --paddle_col_;
  if (action == kRight && paddle_col_ + 1 < kCols) ++paddle_col_;
  ++ball_row_;
  StepResult r;
  r.done = ball_row_ == kRows - 1;
  if (r.done) r.reward = paddle_col_ == ball_col_ ? 1.0 : -1.0;
  r.next_observation = render();
  return r;
}

// ---- CartPole ----

std::vector<double> CartPole::do_reset(Rng& rng) {
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  t_ = 0;
  return state_;
}

void CartPole::set_state(const std::vector<double>& state) {
  if (state.size() != 4) throw UsageError("cartpole state has 4 components");
  reset();
  state_ = state;
  replace_observation(state_);
}

StepResult CartPole::do_step(std::size_t action) {
  const double total_mass = kCartMass + kPoleMass;
  const double polemass_length = kPoleMass * kHalfLength;
  double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;
  state_ = {x, x_dot, theta, theta_dot};
  ++t_;

  StepResult r;
  r.reward = 1.0;
  const bool failed = x < -kXLimit || x > kXLimit || theta < -kThetaLimit || theta > kThetaLimit;
  r.truncated = !failed && t_ >= max_steps_;
  r.done = failed || r.truncated;
  r.next_observation = state_;
  return r;
}

// ---- Chain ----

Chain::Chain(std::size_t length, std::size_t max_steps) : length_(length), max_steps_(max_steps) {
  if (length < 2) throw ConfigError("chain needs at least 2 states");
  if (max_steps == 0) throw ConfigError("chain step cap must be positive");
}

std::vector<double> Chain::encode(std::size_t state) const {
  std::vector<double> o(length_, 0.0);
  o.at(state) = 1.0;
  return o;
}

std::vector<double> Chain::do_reset(Rng&) {
  pos_ = 0;
  t_ = 0;
  return encode(pos_);
}

void Chain::set_position(std::size_t state) {
  if (state + 1 >= length_) throw UsageError("chain position must be non-terminal");
  if (done()) reset();
  pos_ = state;
  replace_observation(encode(pos_));
}

StepResult Chain::do_step(std::size_t action) {
  if (action == kRight) {
    ++pos_;
  } else if (pos_ > 0) {
    --pos_;
  }
  ++t_;
  StepResult r;
  const bool terminal = pos_ == length_ - 1;
  r.reward = terminal ? 1.0 : 0.0;
  r.truncated = !terminal && t_ >= max_steps_;
  r.done = terminal || r.truncated;
  r.next_observation = encode(pos_);
  return r;
}

}  // namespace opd::env
