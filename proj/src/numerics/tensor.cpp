#include "opd/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "opd/errors.hpp"

namespace opd::num {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.size() > 2) throw UsageError("tensor rank above 2 is not supported");
  if (numel(shape) != data.size()) {
    throw UsageError("data length " + std::to_string(data.size()) + " does not match shape " +
                     to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, fill), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  auto n = data.size();
  return from({n}, std::move(data), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
  return from({rows, cols}, std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  if (s.empty()) return 1;
  return s.back();
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor::from(shape(), node_->value, false); }

Tensor Tensor::clone(bool requires_grad) const { return Tensor::from(shape(), node_->value, requires_grad); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::size_t ComputationRecord::op_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node* n) { return !n->is_leaf; }));
}

ComputationRecord record_of(const Tensor& root) {
  ComputationRecord rec;
  if (!root.defined()) return rec;
  std::unordered_set<const Node*> seen;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    rec.nodes.push_back(node);
    stack.pop_back();
  }
  return rec;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  auto rec = record_of(loss);
  for (const Node* n : rec.nodes) {
    auto* node = const_cast<Node*>(n);
    if (!node->is_leaf) node->grad.assign(node->value.size(), 0.0);
  }
  auto* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = rec.nodes.rbegin(); it != rec.nodes.rend(); ++it) {
    auto* node = const_cast<Node*>(*it);
    if (node->backward_fn) node->backward_fn(*node);
  }
}

void check_finite(const Tensor& root) {
  for (const Node* n : record_of(root).nodes) {
    for (double v : n->value) {
      if (!std::isfinite(v)) {
        throw NumericError(n->op, "output of shape " + to_string(n->shape) + " contains " +
                                      std::to_string(v));
      }
    }
  }
}

}  // namespace opd::num
