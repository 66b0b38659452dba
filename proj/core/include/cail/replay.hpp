#pragma once

#include <cstdint>
#include <vector>

#include "cail/image.hpp"
#include "cail/rng.hpp"

namespace cail {

// One stored step. `reward` is the discriminator-derived value at storage
// time; it is stale by design and always recomputed at update time.
struct Transition {
  VisualState v;
  float action = 0.0f;
  float reward = 0.0f;
  VisualState v_next;
  std::uint8_t done = 0;  // 1 only on true terminal states, never on truncation
};

// FIFO ring of transitions. Single-writer/single-reader within the training
// thread.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void push(const Transition& t);
  // n transitions drawn uniformly with replacement. Throws on empty buffer.
  std::vector<const Transition*> sample(std::size_t n, RngStream& rng) const;

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return storage_[i]; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // ring cursor once full
  std::vector<Transition> storage_;
};

}  // namespace cail
