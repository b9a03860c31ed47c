#pragma once
// Shared generators for the unit and acceptance tests.

#include <cstdint>
#include <vector>

#include "opd/numerics/rng.hpp"
#include "opd/numerics/tensor.hpp"
#include "opd/policy/network.hpp"

namespace opd::testing {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline num::Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0,
                                 bool requires_grad = false) {
  return num::Tensor::matrix(rows, cols, random_vector(rng, rows * cols, lo, hi), requires_grad);
}

/// Small random architecture: 1..3 extractor layers of width 1..16.
inline policy::Architecture random_architecture(Rng& rng, policy::Algorithm algo) {
  policy::Architecture a;
  a.algorithm = algo;
  a.input_dim = 1 + rng.below(8);
  a.action_count = 2 + rng.below(4);
  a.hidden.clear();
  const std::size_t layers = 1 + rng.below(3);
  for (std::size_t i = 0; i < layers; ++i) a.hidden.push_back(1 + rng.below(16));
  return a;
}

}  // namespace opd::testing
