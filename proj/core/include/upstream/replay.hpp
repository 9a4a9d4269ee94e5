#pragma once

#include <cstddef>
#include <vector>

#include "upstream/rng.hpp"

namespace upstream {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Bounded FIFO experience store with uniform sampling (with replacement).
// Eviction is strictly oldest-first via a ring buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    storage_.reserve(capacity_);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return storage_.size(); }
  std::size_t total_inserted() const { return total_inserted_; }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
    ++total_inserted_;
  }

  // k-th oldest surviving transition (0 = oldest).
  const Transition& oldest(std::size_t k) const {
    return storage_[(head_ + k) % storage_.size()];
  }

  const Transition& sample_one(RngStream& rng) const {
    return storage_[static_cast<std::size_t>(rng.uniform_int(storage_.size()))];
  }

  std::vector<const Transition*> sample(std::size_t batch_size, RngStream& rng) const {
    std::vector<const Transition*> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&sample_one(rng));
    return batch;
  }

  void clear() {
    storage_.clear();
    head_ = 0;
    total_inserted_ = 0;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // index of the oldest element once full
  std::size_t total_inserted_ = 0;
};

// Fires every C ticks: at ticks C, 2C, 3C, ...
class TargetSyncCounter {
 public:
  explicit TargetSyncCounter(long period) : period_(period) {
    if (period_ < 1) throw std::invalid_argument("TargetSyncCounter: period must be >= 1");
  }

  bool tick() {
    ++count_;
    return count_ % period_ == 0;
  }

  long count() const { return count_; }
  long period() const { return period_; }
  void restore(long count) { count_ = count; }

 private:
  long period_;
  long count_ = 0;
};

}  // namespace upstream
