#include "opd/distill/attention.hpp"

#include <cmath>

#include "opd/errors.hpp"
#include "opd/numerics/ops.hpp"

namespace opd::distill {

using num::Tensor;

std::string to_string(AttentionMode mode) {
  return mode == AttentionMode::kDecisionAttention ? "decision_attention" : "equal_weights";
}

AttentionMode parse_attention_mode(const std::string& name) {
  if (name == "decision_attention") return AttentionMode::kDecisionAttention;
  if (name == "equal_weights") return AttentionMode::kEqualWeights;
  throw ConfigError("unknown attention_mode '" + name + "' (expected decision_attention or equal_weights)");
}

AttentionWeights decision_attention_weights(std::span<const double> student,
                                            const std::vector<std::span<const double>>& peers) {
  if (peers.empty()) throw UsageError("decision attention needs at least one peer");
  if (student.empty()) throw UsageError("decision attention over empty decision vectors");
  const std::size_t dk = student.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<double> scores(peers.size());
  for (std::size_t k = 0; k < peers.size(); ++k) {
    if (peers[k].size() != dk) throw UsageError("decision attention: peer decision dimension differs from student");
    double dot = 0.0;
    for (std::size_t d = 0; d < dk; ++d) dot += student[d] * peers[k][d];
    scores[k] = dot * scale;
  }
  return {num::softmax_temperature(scores, 1.0), static_cast<double>(dk)};
}

AttentionWeights equal_weights(std::size_t peer_count) {
  if (peer_count == 0) throw UsageError("equal weights need at least one peer");
  return {std::vector<double>(peer_count, 1.0 / static_cast<double>(peer_count)), 1.0};
}

namespace {

void check_simplex(const AttentionWeights& w) {
  double s = 0.0;
  for (double v : w.weights) {
    if (!(v >= 0.0)) throw UsageError("aggregate: weights must be nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw UsageError("aggregate: weights must sum to one");
}

}  // namespace

std::vector<double> aggregate(const std::vector<std::span<const double>>& values, const AttentionWeights& weights) {
  if (values.size() != weights.size() || values.empty()) throw UsageError("aggregate: weights do not index the peer list");
  check_simplex(weights);
  // Written as v_0 + sum_k w_k (v_k - v_0), which equals the convex
  // combination when the weights sum to one and is exact for identical peers.
  const std::size_t d = values.front().size();
  std::vector<double> out(values.front().begin(), values.front().end());
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k].size() != d) throw UsageError("aggregate: peer values differ in dimension");
    for (std::size_t i = 0; i < d; ++i) out[i] += weights[k] * (values[k][i] - values[0][i]);
  }
  return out;
}

double aggregate(std::span<const double> scalars, const AttentionWeights& weights) {
  if (scalars.size() != weights.size() || scalars.empty()) throw UsageError("aggregate: weights do not index the peer list");
  check_simplex(weights);
  double out = scalars[0];
  for (std::size_t k = 1; k < scalars.size(); ++k) out += weights[k] * (scalars[k] - scalars[0]);
  return out;
}

AggregatedTarget build_targets(const policy::ForwardResult& student, const std::vector<policy::ForwardResult>& peers,
                               AttentionMode mode) {
  if (peers.empty()) throw UsageError("aggregated targets need at least one peer");
  const std::size_t n = student.decision.rows(), p = student.decision.cols(), h = student.feature.cols();
  const bool has_critic = student.value.defined();
  for (const auto& peer : peers) {
    if (peer.decision.rows() != n || peer.decision.cols() != p || peer.feature.cols() != h ||
        peer.value.defined() != has_critic) {
      throw UsageError("aggregated targets: peer outputs do not match the student's shape");
    }
  }

  AggregatedTarget tgt;
  std::vector<double> dec(n * p), feat(n * h), crit(has_critic ? n : 0);
  tgt.weights.reserve(n);
  std::vector<std::span<const double>> rows(peers.size());
  std::vector<double> scalars(peers.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < peers.size(); ++k) rows[k] = peers[k].decision.values().subspan(r * p, p);
    AttentionWeights w = mode == AttentionMode::kDecisionAttention
                             ? decision_attention_weights(student.decision.values().subspan(r * p, p), rows)
                             : equal_weights(peers.size());
    const auto d = aggregate(rows, w);
    std::copy(d.begin(), d.end(), dec.begin() + static_cast<std::ptrdiff_t>(r * p));

    for (std::size_t k = 0; k < peers.size(); ++k) rows[k] = peers[k].feature.values().subspan(r * h, h);
    const auto f = aggregate(rows, w);
    std::copy(f.begin(), f.end(), feat.begin() + static_cast<std::ptrdiff_t>(r * h));

    if (has_critic) {
      for (std::size_t k = 0; k < peers.size(); ++k) scalars[k] = peers[k].value[r];
      crit[r] = aggregate(scalars, w);
    }
    tgt.weights.push_back(std::move(w));
  }
  tgt.decision = Tensor::matrix(n, p, std::move(dec));
  tgt.feature = Tensor::matrix(n, h, std::move(feat));
  if (has_critic) tgt.critic = Tensor::vector(std::move(crit));
  return tgt;
}

}  // namespace opd::distill
