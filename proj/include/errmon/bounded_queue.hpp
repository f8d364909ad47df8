#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace errmon {

/// Fixed-capacity FIFO used at every cross-context boundary. Producers and
/// the consumer may live in different execution contexts.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// False (and counted as a drop) when full.
  bool try_push(T value) {
    std::lock_guard lock(mu_);
    if (items_.size() >= capacity_) {
      ++dropped_;
      return false;
    }
    items_.push_back(std::move(value));
    ++pushed_;
    if (items_.size() > high_watermark_) high_watermark_ = items_.size();
    return true;
  }

  /// Reinserts at the head, bypassing the capacity check (used to requeue
  /// work that was already admitted).
  void push_front(T value) {
    std::lock_guard lock(mu_);
    items_.push_front(std::move(value));
    if (items_.size() > high_watermark_) high_watermark_ = items_.size();
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::vector<T> pop_up_to(std::size_t n) {
    std::lock_guard lock(mu_);
    std::vector<T> out;
    const std::size_t take = n < items_.size() ? n : items_.size();
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      out.push_back(std::move(items_.front()));
      items_.pop_front();
    }
    return out;
  }

  std::vector<T> drain() { return pop_up_to(static_cast<std::size_t>(-1)); }

  const T* front_unsafe() const { return items_.empty() ? nullptr : &items_.front(); }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  bool empty() const { return size() == 0; }
  std::size_t capacity() const { return capacity_; }
  std::size_t high_watermark() const { return high_watermark_; }
  std::size_t dropped() const { return dropped_; }
  std::size_t pushed() const { return pushed_; }

 private:
  mutable std::mutex mu_;
  std::deque<T> items_;
  std::size_t capacity_;
  std::size_t high_watermark_ = 0;
  std::size_t dropped_ = 0;
  std::size_t pushed_ = 0;
};

}  // namespace errmon
