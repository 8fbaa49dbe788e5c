#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace warenav {

/// Array-backed binary heap. `before(a, b)` is true when `a` must leave the
/// heap ahead of `b`; with std::less the smallest element pops first.
template <typename T, typename Before = std::less<T>>
class BinaryHeap {
 public:
  BinaryHeap() = default;
  explicit BinaryHeap(Before before) : before_(std::move(before)) {}

  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] const T& top() const { return items_.front(); }

  void reserve(std::size_t n) { items_.reserve(n); }
  void clear() { items_.clear(); }

  void push(T item) {
    items_.push_back(std::move(item));
    sift_up(items_.size() - 1);
  }

  T pop() {
    T out = std::move(items_.front());
    if (items_.size() > 1) {
      items_.front() = std::move(items_.back());
      items_.pop_back();
      sift_down(0);
    } else {
      items_.pop_back();
    }
    return out;
  }

 private:
  void sift_up(std::size_t i) {
    T item = std::move(items_[i]);
    while (i > 0) {
      const std::size_t parent = (i - 1) / 2;
      if (!before_(item, items_[parent])) break;
      items_[i] = std::move(items_[parent]);
      i = parent;
    }
    items_[i] = std::move(item);
  }

  void sift_down(std::size_t i) {
    const std::size_t n = items_.size();
    T item = std::move(items_[i]);
    while (true) {
      std::size_t child = 2 * i + 1;
      if (child >= n) break;
      if (child + 1 < n && before_(items_[child + 1], items_[child])) ++child;
      if (!before_(items_[child], item)) break;
      items_[i] = std::move(items_[child]);
      i = child;
    }
    items_[i] = std::move(item);
  }

  std::vector<T> items_;
  Before before_{};
};

}  // namespace warenav
