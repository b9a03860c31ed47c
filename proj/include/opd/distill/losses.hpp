#pragma once

#include <cstddef>
#include <span>

#include "opd/distill/attention.hpp"
#include "opd/numerics/tensor.hpp"
#include "opd/policy/network.hpp"

namespace opd::distill {

/// Floor applied to student probabilities inside the log ratio.
inline constexpr double kProbabilityFloor = 1e-12;

struct DecisionDiagnostics {
  std::size_t clamped_probabilities = 0;  // student entries that hit the floor
};

/// sum_p t_p * log(t_p / q_p) for plain vectors; 0 * log 0 counts as 0.
double kl_divergence(std::span<const double> target, std::span<const double> student);

/// Batch mean of KL(target || softmax(student_logits / T)). The target is a
/// constant [n, P] matrix of log-probabilities.
num::Tensor kl_to_student(const num::Tensor& target_log_probs, const num::Tensor& student_logits, double temperature,
                          DecisionDiagnostics* diagnostics = nullptr);

/// DQN: KL between tempered softmaxes of aggregated and student Q-values.
/// PPO: KL between the action distributions plus MSE between critic values.
num::Tensor decision_loss(const policy::ForwardResult& student, const AggregatedTarget& target,
                          policy::Algorithm algorithm, double temperature,
                          DecisionDiagnostics* diagnostics = nullptr);

/// Mean squared error over feature components and batch.
num::Tensor feature_loss(const num::Tensor& student_feature, const num::Tensor& feature_target);

struct LossCoefficients {
  double rl = 1.0;
  double decision = 1.0;
  double feature = 1.0;
};

struct LossBreakdown {
  double rl = 0.0;
  double decision = 0.0;
  double feature = 0.0;
  double total = 0.0;
  LossCoefficients coefficients;
};

/// total = a_rl * rl + a_dec * decision + a_feat * feature. ParameterError
/// on non-finite components or negative coefficients.
LossBreakdown total_loss(double rl, double decision, double feature, const LossCoefficients& coefficients = {});

/// Differentiable form. Undefined tensors and zero-coefficient terms are
/// left out of the graph; `breakdown` receives the unweighted values.
num::Tensor total_loss(const num::Tensor& rl, const num::Tensor& decision, const num::Tensor& feature,
                       const LossCoefficients& coefficients, LossBreakdown* breakdown = nullptr);

}  // namespace opd::distill
