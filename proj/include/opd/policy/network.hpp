#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opd/numerics/tensor.hpp"

namespace opd::policy {

enum class Algorithm { kDqn, kPpo };

std::string to_string(Algorithm a);
/// "dqn" or "ppo"; anything else is a ConfigError.
Algorithm parse_algorithm(const std::string& name);

struct Architecture {
  Algorithm algorithm = Algorithm::kDqn;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t action_count = 0;

  std::size_t feature_dim() const { return hidden.back(); }
  bool operator==(const Architecture&) const = default;
};

/// Throws ParameterError on zero widths or an empty extractor.
void validate(const Architecture& arch);
std::string describe(const Architecture& arch);

/// Per-batch outputs. `decision` holds Q-values (DQN) or actor logits (PPO),
/// one row per state. `value` is the critic output for PPO and undefined for
/// DQN. `feature` is the post-nonlinearity output of the last extractor layer.
struct ForwardResult {
  num::Tensor decision;
  num::Tensor value;
  num::Tensor feature;
};

struct Linear {
  num::Tensor weight;  // [in, out]
  num::Tensor bias;    // [out]
};

/// Fully connected extractor with a Q head, or with shared-backbone actor
/// and critic heads. Copies are deep.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(const PolicyNetwork& other);
  PolicyNetwork& operator=(const PolicyNetwork& other);
  PolicyNetwork(PolicyNetwork&&) noexcept = default;
  PolicyNetwork& operator=(PolicyNetwork&&) noexcept = default;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  static PolicyNetwork init(const Architecture& arch, std::uint64_t seed);

  /// `states` is [n, input_dim]. Throws UsageError on a dimension mismatch.
  ForwardResult forward(const num::Tensor& states) const;

  std::vector<num::Tensor> parameters() const;
  std::size_t parameter_count() const;
  /// Flattened copy of every parameter value, in parameters() order.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  /// Hard copy of another network's parameter values into this one.
  void copy_parameters_from(const PolicyNetwork& other);

  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t training_step() const { return step_; }
  void set_training_step(std::int64_t step) { step_ = step; }

 private:
  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::int64_t step_ = 0;
  std::vector<Linear> extractor_;
  Linear head_;
  Linear critic_;
};

/// Stacks observations into an [n, dim] constant tensor.
num::Tensor stack_observations(std::span<const std::vector<double>> observations);
num::Tensor stack_observations(std::span<const std::vector<double>* const> observations);

struct CheckpointInfo {
  std::uint32_t format_version = 0;
  std::string env_id;
};

/// Binary container: magic, version, architecture, seed, step, env id,
/// parameter payload, FNV-1a checksum. Multi-byte fields are little-endian.
void save_checkpoint(const PolicyNetwork& net, const std::string& path, const std::string& env_id = "");

/// Throws IntegrityError on bad magic, truncation, checksum failure, or when
/// `expected` is given and the stored architecture differs.
PolicyNetwork load_checkpoint(const std::string& path, const std::optional<Architecture>& expected = std::nullopt,
                              CheckpointInfo* info = nullptr);

}  // namespace opd::policy
