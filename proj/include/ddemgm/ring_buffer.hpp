#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ddemgm {

/// Fixed-capacity window of fixed-width rows. Pushing into a full window
/// overwrites the oldest row. Storage is allocated once.
template <typename T>
class RowRing {
 public:
  RowRing() = default;
  RowRing(std::size_t capacity, std::size_t width)
      : capacity_(capacity), width_(width), data_(capacity * width) {}

  void push(std::span<const T> row) {
    assert(row.size() == width_);
    std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * width_));
    head_ = head_ + 1 == capacity_ ? 0 : head_ + 1;
    if (size_ < capacity_) ++size_;
  }

  /// Row i counted from the oldest retained row.
  std::span<const T> operator[](std::size_t i) const {
    assert(i < size_);
    std::size_t slot = (size_ < capacity_ ? 0 : head_) + i;
    if (slot >= capacity_) slot -= capacity_;
    return {data_.data() + slot * width_, width_};
  }

  void clear() noexcept {
    head_ = 0;
    size_ = 0;
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t width() const noexcept { return width_; }
  bool full() const noexcept { return size_ == capacity_; }

 private:
  std::size_t capacity_ = 0;
  std::size_t width_ = 0;
  std::size_t head_ = 0;  // next slot to write
  std::size_t size_ = 0;
  std::vector<T> data_;
};

}  // namespace ddemgm
