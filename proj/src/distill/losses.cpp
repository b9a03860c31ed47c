#include "opd/distill/losses.hpp"

#include <cmath>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"

namespace opd::distill {

using num::Tensor;

double kl_divergence(std::span<const double> target, std::span<const double> student) {
  if (target.size() != student.size()) throw UsageError("KL divergence over vectors of different length");
  double kl = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] <= 0.0) continue;
    kl += target[i] * (std::log(target[i]) - std::log(std::max(student[i], kProbabilityFloor)));
  }
  return kl;
}

Tensor kl_to_student(const Tensor& target_log_probs, const Tensor& student_logits, double temperature,
                     DecisionDiagnostics* diagnostics) {
  if (target_log_probs.shape() != student_logits.shape()) {
    throw UsageError("decision loss: target " + num::to_string(target_log_probs.shape()) + " vs student " +
                     num::to_string(student_logits.shape()));
  }
  if (!(temperature > 0.0)) throw ParameterError("distillation temperature must be positive");
  const double log_floor = std::log(kProbabilityFloor);
  const Tensor log_q = num::log_softmax(student_logits, temperature);
  if (diagnostics) {
    for (double v : log_q.values())
      if (v < log_floor) ++diagnostics->clamped_probabilities;
  }
  const Tensor log_q_guarded = num::clamp(log_q, log_floor, 0.0);

  const Tensor log_t = target_log_probs.detach();
  std::vector<double> t(log_t.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::exp(log_t[i]);
  const Tensor probs = Tensor::from(log_t.shape(), std::move(t));
  const double rows = static_cast<double>(target_log_probs.rows());
  return num::scale(num::sum(num::mul(probs, num::sub(log_t, log_q_guarded))), 1.0 / rows);
}

Tensor decision_loss(const policy::ForwardResult& student, const AggregatedTarget& target,
                     policy::Algorithm algorithm, double temperature, DecisionDiagnostics* diagnostics) {
  if (!(temperature > 0.0)) throw ParameterError("distillation temperature must be positive");
  Tensor target_log_probs;
  {
    num::NoGradGuard guard;
    target_log_probs = num::log_softmax(target.decision.detach(), temperature);
  }
  Tensor loss = kl_to_student(target_log_probs, student.decision, temperature, diagnostics);
  if (algorithm == policy::Algorithm::kPpo) {
    if (!student.value.defined() || !target.critic.defined()) {
      throw UsageError("PPO decision loss needs critic outputs and a critic target");
    }
    loss = num::add(loss, num::mse(student.value, target.critic.detach()));
  }
  return loss;
}

Tensor feature_loss(const Tensor& student_feature, const Tensor& feature_target) {
  if (student_feature.shape() != feature_target.shape()) {
    throw UsageError("feature loss: student " + num::to_string(student_feature.shape()) + " vs target " +
                     num::to_string(feature_target.shape()));
  }
  return num::mse(student_feature, feature_target.detach());
}

namespace {

void check_coefficients(const LossCoefficients& c) {
  for (double a : {c.rl, c.decision, c.feature})
    if (!(a >= 0.0) || !std::isfinite(a)) throw ParameterError("loss coefficients must be finite and nonnegative");
}

}  // namespace

LossBreakdown total_loss(double rl, double decision, double feature, const LossCoefficients& c) {
  check_coefficients(c);
  for (double v : {rl, decision, feature})
    if (!std::isfinite(v)) throw ParameterError("loss components must be finite");
  LossBreakdown b{rl, decision, feature, 0.0, c};
  b.total = c.rl * rl + c.decision * decision + c.feature * feature;
  return b;
}

Tensor total_loss(const Tensor& rl, const Tensor& decision, const Tensor& feature, const LossCoefficients& c,
                  LossBreakdown* breakdown) {
  check_coefficients(c);
  Tensor total;
  auto accumulate = [&](const Tensor& term, double coef) {
    if (!term.defined() || coef == 0.0) return;
    const Tensor weighted = coef == 1.0 ? term : num::scale(term, coef);
    total = total.defined() ? num::add(total, weighted) : weighted;
  };
  accumulate(rl, c.rl);
  accumulate(decision, c.decision);
  accumulate(feature, c.feature);
  if (!total.defined()) total = Tensor::scalar(0.0);
  if (breakdown) {
    *breakdown = total_loss(rl.defined() ? rl.item() : 0.0, decision.defined() ? decision.item() : 0.0,
                            feature.defined() ? feature.item() : 0.0, c);
  }
  return total;
}

}  // namespace opd::distill
