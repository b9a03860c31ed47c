#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opd/numerics/rng.hpp"

namespace opd::rl {

struct Transition {
  std::vector<double> s;
  std::size_t a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;  // true terminal; step-cap truncation is not stored as done
};

/// Fixed-capacity ring of transitions with a seeded uniform sampler.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  /// n draws, uniform with replacement over the current contents.
  std::vector<const Transition*> sample(std::size_t n);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
  Rng rng_;
};

}  // namespace opd::rl
