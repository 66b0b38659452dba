#include "cail/replay.hpp"

#include "cail/errors.hpp"

namespace cail {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw StorageError("replay capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(t);
  } else {
    storage_[next_] = t;  // evict oldest first
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n,
                                                    RngStream& rng) const {
  if (storage_.empty()) throw StorageError("sample from empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(&storage_[rng.uniform_index(storage_.size())]);
  return out;
}

}  // namespace cail
