#include "opd/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "opd/errors.hpp"

namespace opd::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Wraps a freshly computed value into a tensor, attaching history when any
// input participates in differentiation.
Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<const Tensor*> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (wants_grad(inputs)) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Parent grad buffer, or nullptr if that parent does not need one.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

const std::vector<double>& parent_value(const Node& self, std::size_t i) { return self.parents[i]->value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw UsageError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw UsageError(std::string(op) + ": expected rank-2 tensor, got " + to_string(a.shape()));
}

// Row-major [rows, cols] view for row-wise ops; rank-1 is a single row.
std::pair<std::size_t, std::size_t> row_view(const Tensor& a, const char* op) {
  if (a.rank() == 2) return {a.shape()[0], a.shape()[1]};
  if (a.rank() == 1) return {1, a.shape()[0]};
  throw UsageError(std::string(op) + ": expected rank-1 or rank-2 tensor");
}

template <typename F, typename D>
Tensor unary(const Tensor& a, const char* op, F f, D dfdx) {
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), op, {&a}, [dfdx](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    const auto& x = parent_value(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[i] * dfdx(x[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw UsageError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<double> out(n * m);
  MutMap(out.data(), n, m).noalias() = ConstMap(a.values().data(), n, k) * ConstMap(b.values().data(), k, m);
  return make_result({n, m}, std::move(out), "matmul", {&a, &b}, [n, k, m](Node& self) {
    ConstMap g(self.grad.data(), n, m);
    if (double* ga = parent_grad(self, 0)) {
      MutMap(ga, n, k).noalias() += g * ConstMap(parent_value(self, 1).data(), k, m).transpose();
    }
    if (double* gb = parent_grad(self, 1)) {
      MutMap(gb, k, m).noalias() += ConstMap(parent_value(self, 0).data(), n, k).transpose() * g;
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& b) {
  require_rank2(x, "add_row");
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (b.size() != m) throw UsageError("add_row: bias length " + std::to_string(b.size()) + " vs width " + std::to_string(m));
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = b.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bv[c];
  return make_result(x.shape(), std::move(out), "add", {&x, &b}, [n, m](Node& self) {
    if (double* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < n * m; ++i) gx[i] += self.grad[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) gb[c] += self.grad[r * m + c];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), "add", {&a, &b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = parent_grad(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), "sub", {&a, &b}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), "mul", {&a, &b}, [](Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, "add", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a, double floor) {
  return unary(
      a, "log", [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s}, "sum", {&a}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw UsageError("mean of empty tensor");
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s / n}, "mean", {&a}, [n](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += self.grad[0] / n;
  });
}

Tensor row_sum(const Tensor& a) {
  auto [n, m] = row_view(a, "row_sum");
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r] += a[r * m + c];
  return make_result({n}, std::move(out), "row_sum", {&a}, [n = n, m = m](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) g[r * m + c] += self.grad[r];
  });
}

Tensor softmax(const Tensor& a, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
  auto [n, m] = row_view(a, "softmax");
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < n; ++r) {
    auto p = softmax_temperature(a.values().subspan(r * m, m), temperature);
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(r * m));
  }
  return make_result(a.shape(), std::move(out), "softmax", {&a}, [n = n, m = m, temperature](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < n; ++r) {
      const double* y = &self.value[r * m];
      const double* gy = &self.grad[r * m];
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += gy[c] * y[c];
      for (std::size_t c = 0; c < m; ++c) g[r * m + c] += y[c] * (gy[c] - dot) / temperature;
    }
  });
}

Tensor log_softmax(const Tensor& a, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("log_softmax temperature must be positive");
  auto [n, m] = row_view(a, "log_softmax");
  if (m == 0) throw ParameterError("log_softmax of empty row");
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &a.values()[r * m];
    double mx = *std::max_element(z, z + m) / temperature;
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += std::exp(z[c] / temperature - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] = z[c] / temperature - lse;
  }
  return make_result(a.shape(), std::move(out), "log_softmax", {&a}, [n = n, m = m, temperature](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < n; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < m; ++c) gs += self.grad[r * m + c];
      for (std::size_t c = 0; c < m; ++c) {
        const double p = std::exp(self.value[r * m + c]);
        g[r * m + c] += (self.grad[r * m + c] - p * gs) / temperature;
      }
    }
  });
}

Tensor pick(const Tensor& a, std::span<const std::size_t> index) {
  auto [n, m] = row_view(a, "pick");
  if (index.size() != n) throw UsageError("pick: index count does not match rows");
  std::vector<double> out(n);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < n; ++r) {
    if (idx[r] >= m) throw UsageError("pick: column index out of range");
    out[r] = a[r * m + idx[r]];
  }
  return make_result({n}, std::move(out), "pick", {&a}, [m = m, idx = std::move(idx)](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t r = 0; r < idx.size(); ++r) g[r * m + idx[r]] += self.grad[r];
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
  return make_result(a.shape(), std::move(out), "minimum", {&a, &b}, [](Node& self) {
    const auto& av = parent_value(self, 0);
    const auto& bv = parent_value(self, 1);
    double* ga = parent_grad(self, 0);
    double* gb = parent_grad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      // Ties route the gradient to the first argument.
      if (av[i] <= bv[i]) {
        if (ga) ga[i] += self.grad[i];
      } else if (gb) {
        gb[i] += self.grad[i];
      }
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ParameterError("clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat");
  require_rank2(b, "concat");
  const std::size_t n = a.shape()[0], m1 = a.shape()[1], m2 = b.shape()[1];
  if (b.shape()[0] != n) throw UsageError("concat: row counts differ");
  std::vector<double> out(n * (m1 + m2));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m1; ++c) out[r * (m1 + m2) + c] = a[r * m1 + c];
    for (std::size_t c = 0; c < m2; ++c) out[r * (m1 + m2) + m1 + c] = b[r * m2 + c];
  }
  return make_result({n, m1 + m2}, std::move(out), "concat", {&a, &b}, [n, m1, m2](Node& self) {
    const std::size_t w = m1 + m2;
    if (double* ga = parent_grad(self, 0))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m1; ++c) ga[r * m1 + c] += self.grad[r * w + c];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m2; ++c) gb[r * m2 + c] += self.grad[r * w + m1 + c];
  });
}

Tensor mse(const Tensor& prediction, const Tensor& target) { return mean(square(sub(prediction, target))); }

std::vector<double> softmax_temperature(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("softmax temperature must be a positive finite number");
  }
  if (logits.empty()) throw ParameterError("softmax of an empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace opd::num
