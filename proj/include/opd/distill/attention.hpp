#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opd/numerics/tensor.hpp"
#include "opd/policy/network.hpp"

namespace opd::distill {

enum class AttentionMode { kDecisionAttention, kEqualWeights };

std::string to_string(AttentionMode mode);
AttentionMode parse_attention_mode(const std::string& name);

/// One student's weights over its peers: nonnegative, summing to one.
struct AttentionWeights {
  std::vector<double> weights;  // weights[k] belongs to the k-th peer in the input list
  double key_dim = 1.0;         // d_k, the decision dimension used for 1/sqrt(d_k) scaling

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t k) const { return weights[k]; }
};

/// Softmax over peers of <student, peer_k> / sqrt(d_k). UsageError on zero
/// peers or mismatched dimensions.
AttentionWeights decision_attention_weights(std::span<const double> student,
                                            const std::vector<std::span<const double>>& peers);

/// 1/(T-1) for every peer.
AttentionWeights equal_weights(std::size_t peer_count);

/// Convex combination sum_k w_k * values_k.
std::vector<double> aggregate(const std::vector<std::span<const double>>& values, const AttentionWeights& weights);
double aggregate(std::span<const double> scalars, const AttentionWeights& weights);

/// Gradient-isolated batch targets for one student.
struct AggregatedTarget {
  num::Tensor decision;  // [n, P]
  num::Tensor critic;    // [n], PPO only
  num::Tensor feature;   // [n, H]
  std::vector<AttentionWeights> weights;  // per state
};

/// Per-state weights from the student's decision rows, then aggregation of
/// peer decisions, critic values (reusing the actor-derived weights) and
/// features. Peers must be forwarded on the same states as the student.
AggregatedTarget build_targets(const policy::ForwardResult& student, const std::vector<policy::ForwardResult>& peers,
                               AttentionMode mode);

}  // namespace opd::distill
