#include "opd/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "opd/errors.hpp"

namespace opd::num {

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double step) {
  if (!(step >= 1e-6 && step <= 1e-3)) throw ParameterError("grad_check step must lie in [1e-6, 1e-3]");
  for (auto& p : params) p.zero_grad();

  Tensor loss = f();
  check_finite(loss);
  backward(loss);

  double worst = 0.0;
  for (auto& p : params) {
    const auto g_auto = p.grad();
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double up = 0.0, down = 0.0;
      {
        NoGradGuard guard;
        values[i] = saved + step;
        Tensor lp = f();
        check_finite(lp);
        up = lp.item();
        values[i] = saved - step;
        Tensor lm = f();
        check_finite(lm);
        down = lm.item();
      }
      values[i] = saved;
      const double g_fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(g_auto[i] - g_fd) / std::max(1.0, std::abs(g_fd)));
    }
    p.zero_grad();
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step) {
  Tensor x = point.clone(true);
  return grad_check([&] { return f(x); }, {x}, step);
}

}  // namespace opd::num
