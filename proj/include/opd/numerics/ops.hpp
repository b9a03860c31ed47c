#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opd/numerics/tensor.hpp"

// Differentiable primitives. Shapes are checked eagerly and mismatches raise
// UsageError. Binary elementwise ops require identical shapes.
namespace opd::num {

Tensor matmul(const Tensor& a, const Tensor& b);
/// x[n,m] + b[m] broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
/// Natural log of max(a, floor); the gradient is zero where the floor binds.
Tensor log(const Tensor& a, double floor = 0.0);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// [n,m] -> [n]
Tensor row_sum(const Tensor& a);
/// Row-wise softmax of a / temperature for rank-2 input (rank-1 treated as one row).
Tensor softmax(const Tensor& a, double temperature = 1.0);
Tensor log_softmax(const Tensor& a, double temperature = 1.0);
/// out[r] = a[r, index[r]]
Tensor pick(const Tensor& a, std::span<const std::size_t> index);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, double lo, double hi);
/// [n,m1] ++ [n,m2] -> [n,m1+m2]
Tensor concat_cols(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }

/// Mean squared error between two same-shape tensors.
Tensor mse(const Tensor& prediction, const Tensor& target);

/// Tempered softmax of a single logit vector, stabilized by max subtraction.
/// Throws ParameterError for T <= 0 or an empty vector.
std::vector<double> softmax_temperature(std::span<const double> logits, double temperature);

}  // namespace opd::num
