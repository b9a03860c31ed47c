#pragma once

#include <functional>
#include <vector>

#include "opd/numerics/tensor.hpp"

namespace opd::num {

/// Largest relative discrepancy between the reverse-mode gradient of `f` and
/// central finite differences, max_i |g_auto - g_fd| / max(1, |g_fd|).
///
/// `params` are perturbed in place and restored. Their grad buffers are
/// zeroed before and after. Throws ParameterError for a step outside
/// [1e-6, 1e-3] and NumericError if any recorded operation is non-finite.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double step = 1e-5);

/// Single-point form: `f` is evaluated on a leaf initialized from `point`.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step = 1e-5);

}  // namespace opd::num
