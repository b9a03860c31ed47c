#include "opd/numerics/adam.hpp"

#include <cmath>

#include "opd/errors.hpp"

namespace opd::num {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Adam::step() {
  double sq = 0.0;
  for (auto& p : params_)
    for (double g : p.mutable_grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  double clip = 1.0;
  if (options_.max_grad_norm > 0.0 && norm > options_.max_grad_norm) clip = options_.max_grad_norm / (norm + 1e-12);

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k].mutable_values();
    auto g = params_[k].mutable_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      w[i] -= options_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
    }
  }
  return norm;
}

}  // namespace opd::num
