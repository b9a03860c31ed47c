#include "opd/rl/replay_buffer.hpp"

#include "opd/errors.hpp"

namespace opd::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ParameterError("replay capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n) {
  if (data_.empty()) throw UsageError("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &data_[rng_.below(data_.size())];
  return out;
}

}  // namespace opd::rl
